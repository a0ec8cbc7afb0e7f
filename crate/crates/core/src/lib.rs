//! Numerical laboratory for nonsingular Bernoulli and Markov shifts.
//!
//! The crate builds inhomogeneous product measures `mu = (x) mu_g` on `A^G`
//! for `G = Z` or `Z^d`, evaluates their Radon-Nikodym cocycles exactly or
//! with a certified truncation error, sums the series behind the
//! nonsingularity, conservativity and ergodicity criteria, and runs
//! Radon-Nikodym weighted ratio averages along Følner boxes.

pub mod cocycles;
pub mod diagnostics;
pub mod engine;
pub mod error;
pub mod group;
pub mod markov;
pub mod measures;

pub use error::{Error, Result};
