//! Level-block families on Z and the non-semistationary example built from
//! them.
//!
//! A block family is binary and symmetric in `|n|`: with `A_0 = 0 < A_1 <
//! A_2 < ...` and `2 A_l <= A_{l+1}`,
//!
//! ```text
//! mu_n(0) = lambda + alpha_l   if A_l <= |n| < 2 A_l  (l >= 1)
//! mu_n(0) = lambda             otherwise
//! ```
//!
//! The example family fixes `A_l = ceil(rho * A_{l-1})` and derives the
//! amplitudes from `sum_{j<=n} alpha_j^2 A_j = log(n) / (4 xi)`, i.e.
//! `alpha_n^2 A_n = (log n - log(n-1)) / (4 xi)` and `alpha_1 = 0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{sq_diff_series, MeasureFamily};

/// Largest block edge kept in the index range: `2 A_l <= 2^62` leaves room
/// for shifts and sums of indices without overflowing `i64`.
const INDEX_LIMIT: f64 = 4_611_686_018_427_387_904.0;

#[derive(Debug, Clone, PartialEq)]
pub struct BlockFamily {
    lambda: f64,
    a: Vec<i64>,
    alpha: Vec<f64>,
}

impl BlockFamily {
    /// `a[0]` must be 0 and `alpha[0]` is ignored.
    pub fn new(lambda: f64, a: Vec<i64>, alpha: Vec<f64>) -> Result<Self> {
        if a.len() != alpha.len() || a.is_empty() {
            return Err(Error::param("a", "need matching nonempty a and alpha sequences"));
        }
        if a[0] != 0 {
            return Err(Error::param("a", "A_0 must be 0"));
        }
        if !(lambda > 0.0 && lambda < 1.0) {
            return Err(Error::param("lambda", format!("{lambda} is not in (0, 1)")));
        }
        for l in 1..a.len() {
            if a[l] < 1 || (l > 1 && a[l] < 2 * a[l - 1]) {
                return Err(Error::param(
                    "a",
                    format!("blocks overlap: A_{l} = {} < 2 A_{} = {}", a[l], l - 1, 2 * a[l - 1]),
                ));
            }
            let p = lambda + alpha[l];
            if !(p > 0.0 && p < 1.0) {
                return Err(Error::param(
                    "alpha",
                    format!("lambda + alpha_{l} = {p} is not in (0, 1)"),
                ));
            }
        }
        let mut alpha = alpha;
        alpha[0] = 0.0;
        Ok(BlockFamily { lambda, a, alpha })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Number of levels `L` (blocks `1..=L`).
    pub fn levels(&self) -> usize {
        self.a.len() - 1
    }

    pub fn a_seq(&self) -> &[i64] {
        &self.a
    }

    pub fn alpha_seq(&self) -> &[f64] {
        &self.alpha
    }

    /// `mu_m(0)` for `m >= 0`.
    pub fn p0(&self, m: i64) -> f64 {
        let l = self.a.partition_point(|&x| x <= m) - 1;
        if l >= 1 && m < 2 * self.a[l] {
            self.lambda + self.alpha[l]
        } else {
            self.lambda
        }
    }

    pub fn min_factor_entry(&self) -> f64 {
        self.alpha
            .iter()
            .map(|&al| {
                let p = self.lambda + al;
                p.min(1.0 - p)
            })
            .fold(self.lambda.min(1.0 - self.lambda), f64::min)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Example33Params {
    pub lambda: f64,
    pub xi: f64,
    pub a1: u64,
    /// Growth factor, `A_l = ceil(rho * A_{l-1})`.
    pub rho: f64,
    /// Number of amplitudes `alpha_1..alpha_levels` derived for the checks.
    #[serde(default = "default_levels")]
    pub levels: usize,
}

fn default_levels() -> usize {
    200
}

impl Example33Params {
    pub fn new(lambda: f64, xi: f64, a1: u64, rho: f64) -> Self {
        Example33Params {
            lambda,
            xi,
            a1,
            rho,
            levels: default_levels(),
        }
    }

    /// Lower threshold on `xi`: `(lambda/2)^-2 + (lambda/2)^-1 (1 - lambda/2)^-2`.
    pub fn xi_threshold(lambda: f64) -> f64 {
        let h = lambda / 2.0;
        h.powi(-2) + h.recip() * (1.0 - h).powi(-2)
    }
}

#[derive(Debug, Clone)]
pub struct Example33 {
    params: Example33Params,
    a: Vec<f64>,
    alpha: Vec<f64>,
    family: BlockFamily,
}

/// Range of `mu_n(0)` over `|n| <= range` against the open interval
/// `(lambda/2, 1 - lambda/2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarginCheck {
    pub range: i64,
    pub min_p0: f64,
    pub max_p0: f64,
    pub lower: f64,
    pub upper: f64,
    pub pass: bool,
}

impl Example33 {
    pub fn build(params: Example33Params) -> Result<Self> {
        let Example33Params {
            lambda,
            xi,
            a1,
            rho,
            levels,
        } = params;
        if !(lambda > 0.0 && lambda < 0.5) {
            return Err(Error::param(
                "lambda",
                format!("lambda = {lambda} must lie in (0, 1/2)"),
            ));
        }
        let threshold = Example33Params::xi_threshold(lambda);
        if !(xi > threshold) {
            return Err(Error::param(
                "xi",
                format!("xi = {xi} must exceed the threshold {threshold:.6}"),
            ));
        }
        if !(rho > 8.0) || !rho.is_finite() {
            return Err(Error::param(
                "rho",
                format!("growth factor rho = {rho} must exceed 8"),
            ));
        }
        if a1 < 1 {
            return Err(Error::param("a1", "A_1 must be a positive integer"));
        }
        if levels < 2 {
            return Err(Error::param("levels", "need at least two levels"));
        }

        let mut a = vec![0.0, a1 as f64];
        for l in 2..=levels {
            let next = (rho * a[l - 1]).ceil();
            if !next.is_finite() {
                return Err(Error::param(
                    "levels",
                    format!("A_{l} overflows; reduce levels or rho"),
                ));
            }
            a.push(next);
        }
        for l in 1..=levels {
            if a[l] <= 8.0 * a[l - 1] {
                return Err(Error::param(
                    "rho",
                    format!("A_{l} = {} does not exceed 8 A_{}", a[l], l - 1),
                ));
            }
        }

        let mut alpha = vec![0.0; levels + 1];
        for n in 2..=levels {
            let inc = -(-1.0 / n as f64).ln_1p();
            alpha[n] = (inc / (4.0 * xi * a[n])).sqrt();
        }
        let cap = 1.0 - 1.5 * lambda;
        for (l, &al) in alpha.iter().enumerate().skip(1) {
            if al >= cap {
                return Err(Error::param(
                    "alpha",
                    format!(
                        "alpha_{l} = {al} violates alpha < 1 - 3 lambda / 2 = {cap}; increase xi or A_1"
                    ),
                ));
            }
            if al >= 0.5 {
                return Err(Error::param("alpha", format!("alpha_{l} = {al} is not below 1/2")));
            }
        }

        let in_range = (1..=levels).take_while(|&l| 2.0 * a[l] <= INDEX_LIMIT).count();
        let fam_a: Vec<i64> = a[..=in_range].iter().map(|&x| x as i64).collect();
        let fam_alpha = alpha[..=in_range].to_vec();
        let family = BlockFamily::new(lambda, fam_a, fam_alpha)?;
        Ok(Example33 {
            params,
            a,
            alpha,
            family,
        })
    }

    pub fn params(&self) -> &Example33Params {
        &self.params
    }

    pub fn levels(&self) -> usize {
        self.params.levels
    }

    /// Levels realized inside the `i64` index range.
    pub fn family_levels(&self) -> usize {
        self.family.levels()
    }

    pub fn a(&self, l: usize) -> f64 {
        self.a[l]
    }

    pub fn a_index(&self, l: usize) -> i64 {
        self.family.a_seq()[l]
    }

    pub fn alpha(&self, l: usize) -> f64 {
        self.alpha[l]
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alpha
    }

    pub fn block_family(&self) -> &BlockFamily {
        &self.family
    }

    pub fn family(&self) -> MeasureFamily {
        MeasureFamily::blocks(self.family.clone())
    }

    /// `alpha_j` in `[0, 1/2)` for all `j`, positive for `j >= 2`, and the
    /// truncated `sum alpha_j^2`.
    pub fn condition_amplitudes(&self) -> (bool, f64) {
        let ok = self.alpha[1] == 0.0
            && self.alpha[2..].iter().all(|&a| a > 0.0 && a < 0.5);
        (ok, self.sum_alpha_sq(self.levels()))
    }

    /// `A_0 = 0` and `A_l > 8 A_{l-1}` for every derived level.
    pub fn condition_growth(&self) -> bool {
        self.a[0] == 0.0 && (1..self.a.len()).all(|l| self.a[l] > 8.0 * self.a[l - 1])
    }

    /// Largest `|sum_{j<=n} alpha_j^2 A_j - log(n) / (4 xi)|` over `1 <= n <= n_max`.
    pub fn partial_sum_identity_error(&self, n_max: usize) -> f64 {
        let n_max = n_max.min(self.levels());
        let mut acc = 0.0;
        let mut worst: f64 = 0.0;
        for n in 1..=n_max {
            acc += self.alpha[n] * self.alpha[n] * self.a[n];
            let target = (n as f64).ln() / (4.0 * self.params.xi);
            worst = worst.max((acc - target).abs());
        }
        worst
    }

    /// Direct evaluation of `mu_n(0)` over `|n| <= range`.
    pub fn margin_check(&self, range: i64) -> MarginCheck {
        let lambda = self.params.lambda;
        let (lower, upper) = (lambda / 2.0, 1.0 - lambda / 2.0);
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for m in 0..=range {
            let p = self.family.p0(m);
            lo = lo.min(p);
            hi = hi.max(p);
        }
        MarginCheck {
            range,
            min_p0: lo,
            max_p0: hi,
            lower,
            upper,
            pass: lower < lo && hi < upper,
        }
    }

    pub fn sum_alpha_sq(&self, upto: usize) -> f64 {
        self.alpha[1..=upto.min(self.levels())]
            .iter()
            .map(|a| a * a)
            .sum()
    }

    /// `sum_n |mu_{n+1}(0) - mu_n(0)|^2` over the whole index range, and
    /// the closed form `4 sum_{j<=levels} alpha_j^2`.
    pub fn unit_shift_energy(&self) -> Result<(f64, f64)> {
        let series = sq_diff_series(&self.family(), 1, u64::MAX)?;
        Ok((series, 4.0 * self.sum_alpha_sq(self.levels())))
    }

    /// `sum_j |mu_{j + 4 A_l}(0) - mu_j(0)|^2` over the whole index range.
    pub fn block_shift_energy(&self, l: usize) -> Result<f64> {
        if l == 0 || l > self.family_levels() {
            return Err(Error::param("l", format!("level {l} outside 1..={}", self.family_levels())));
        }
        sq_diff_series(&self.family(), 4 * self.a_index(l), u64::MAX)
    }

    /// Closed form of [`Self::block_shift_energy`] with the realized levels
    /// `J`: blocks `j <= l` are displaced off themselves, contributing
    /// `4 alpha_j^2 A_j`; each longer block `j > l` keeps its bulk and loses
    /// `4 A_l` sites at each of its four edges, contributing `16 A_l alpha_j^2`.
    pub fn block_shift_closed_form(&self, l: usize) -> f64 {
        let big_j = self.family_levels();
        let near: f64 = (1..=l).map(|j| 4.0 * self.alpha[j].powi(2) * self.a[j]).sum();
        let far: f64 = ((l + 1)..=big_j).map(|j| self.alpha[j].powi(2)).sum();
        near + 16.0 * self.a[l] * far
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference() -> Example33 {
        Example33::build(Example33Params::new(0.4, 33.0, 10, 9.0)).unwrap()
    }

    #[test]
    fn derived_amplitudes() {
        let ex = reference();
        assert_eq!(ex.alpha(1), 0.0);
        let expected = (2f64.ln() / (4.0 * 33.0 * 90.0)).sqrt();
        assert!((ex.alpha(2) - expected).abs() < 1e-15);
        assert_eq!(ex.a(2), 90.0);
        assert_eq!(ex.a_index(6), 590_490);
    }

    #[test]
    fn mu_zero_is_lambda() {
        let ex = reference();
        assert_eq!(ex.family().prob_z(0, 0), 0.4);
        assert_eq!(ex.family().prob_z(9, 0), 0.4);
        // level 1 has alpha_1 = 0, level 2 block is [90, 180)
        assert_eq!(ex.family().prob_z(-95, 0), 0.4 + ex.alpha(2));
        assert_eq!(ex.family().prob_z(180, 0), 0.4);
    }

    #[test]
    fn partial_sum_identity() {
        let ex = reference();
        assert!(ex.partial_sum_identity_error(200) < 1e-12);
        for n in 2..=50 {
            let s: f64 = (1..=n).map(|j| ex.alpha(j).powi(2) * ex.a(j)).sum();
            assert!((s - (n as f64).ln() / 132.0).abs() < 1e-12, "n = {n}");
        }
    }

    #[test]
    fn conditions_hold() {
        let ex = reference();
        assert!(ex.condition_growth());
        assert!(ex.condition_amplitudes().0);
        assert!(ex.margin_check(10_000).pass);
    }

    #[test]
    fn validation_errors_name_constraints() {
        let err = Example33::build(Example33Params::new(0.6, 33.0, 10, 9.0)).unwrap_err();
        assert!(err.to_string().contains("(0, 1/2)"), "{err}");
        let err = Example33::build(Example33Params::new(0.4, 32.0, 10, 9.0)).unwrap_err();
        assert!(err.to_string().contains("32.8125"), "{err}");
        let err = Example33::build(Example33Params::new(0.4, 33.0, 10, 8.0)).unwrap_err();
        assert!(err.to_string().contains("exceed 8"), "{err}");
    }

    #[test]
    fn block_family_rejects_overlap() {
        assert!(BlockFamily::new(0.4, vec![0, 10, 15], vec![0.0, 0.1, 0.1]).is_err());
        assert!(BlockFamily::new(0.4, vec![0, 10, 20], vec![0.0, 0.1, 0.7]).is_err());
        assert!(BlockFamily::new(0.4, vec![0, 10, 20], vec![0.0, 0.1, 0.1]).is_ok());
    }

    #[test]
    fn unit_shift_energy_matches_closed_form() {
        let ex = reference();
        let (series, closed) = ex.unit_shift_energy().unwrap();
        assert!((series - closed).abs() < 1e-12, "{series} vs {closed}");
    }

    #[test]
    fn block_shift_closed_form_matches_brute_force() {
        // small instance so direct summation over every index is feasible
        let ex = Example33::build(Example33Params {
            levels: 5,
            ..Example33Params::new(0.4, 33.0, 3, 9.0)
        })
        .unwrap();
        let fam = ex.family();
        let edge = 2 * ex.a_index(5) + 4 * ex.a_index(4) + 2;
        for l in 1..=4 {
            let s = 4 * ex.a_index(l);
            let brute: f64 = (-edge..=edge)
                .map(|j| (fam.prob_z(j + s, 0) - fam.prob_z(j, 0)).powi(2))
                .sum();
            let closed = ex.block_shift_closed_form(l);
            assert!((brute - closed).abs() < 1e-12, "l = {l}: {brute} vs {closed}");
            assert!((ex.block_shift_energy(l).unwrap() - brute).abs() < 1e-12);
        }
    }
}
