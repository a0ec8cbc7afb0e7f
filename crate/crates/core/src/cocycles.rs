//! Points of `A^G`, tail pairs and the Radon-Nikodym cocycles of a product
//! measure.
//!
//! Conventions: the shift acts by `(T_g x)_h = x_{h - g}`, so
//!
//! ```text
//! Delta(x, y)         = prod_{h in F} mu_h(y_h) / mu_h(x_h)
//! Delta(T_g x, T_g y) = prod_{h in F} mu_{h+g}(y_h) / mu_{h+g}(x_h)
//! d(mu o T_g)/dmu (x) = prod_h mu_{h+g}(x_h) / mu_h(x_h)
//! ```
//!
//! All products are accumulated as sums of logarithms.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::engine::sample_symbol;
use crate::error::{Error, Result};
use crate::group::{GroupElem, Window};
use crate::measures::{Alphabet, MeasureFamily, Symbol};

/// How a point is defined away from its explicit coordinates.
#[derive(Debug, Clone)]
pub enum Fill {
    Constant(Symbol),
    /// Coordinate `h` is drawn from `mu_{h - shift}` by the counter-based
    /// sampler keyed on `(seed, h - shift)`. Translating a sampled point
    /// only moves `shift`.
    Sampled {
        seed: u64,
        family: MeasureFamily,
        shift: GroupElem,
    },
}

impl PartialEq for Fill {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Fill::Constant(a), Fill::Constant(b)) => a == b,
            (
                Fill::Sampled {
                    seed: s1,
                    family: f1,
                    shift: g1,
                },
                Fill::Sampled {
                    seed: s2,
                    family: f2,
                    shift: g2,
                },
            ) => s1 == s2 && g1 == g2 && f1.same_as(f2),
            _ => false,
        }
    }
}

/// A point `x in A^G`: finitely many explicit coordinates plus a total fill
/// rule.
#[derive(Debug, Clone, PartialEq)]
pub struct PatternPoint {
    alphabet: Alphabet,
    dim: usize,
    symbols: BTreeMap<GroupElem, Symbol>,
    fill: Fill,
}

impl PatternPoint {
    pub fn constant(alphabet: Alphabet, dim: usize, fill: Symbol) -> Result<Self> {
        alphabet.check(fill)?;
        Ok(PatternPoint {
            alphabet,
            dim,
            symbols: BTreeMap::new(),
            fill: Fill::Constant(fill),
        })
    }

    /// `x_{start + i} = symbols[i]`, `fill` elsewhere.
    pub fn from_z(alphabet: Alphabet, start: i64, symbols: &[Symbol], fill: Symbol) -> Result<Self> {
        let mut p = PatternPoint::constant(alphabet, 1, fill)?;
        for (i, &a) in symbols.iter().enumerate() {
            p.set(GroupElem::scalar(start + i as i64), a)?;
        }
        Ok(p)
    }

    /// A point distributed according to `fam`, every coordinate drawn on
    /// demand.
    pub fn sampled(fam: &MeasureFamily, seed: u64) -> Self {
        PatternPoint {
            alphabet: fam.alphabet(),
            dim: fam.dim(),
            symbols: BTreeMap::new(),
            fill: Fill::Sampled {
                seed,
                family: fam.clone(),
                shift: GroupElem::zero(fam.dim()),
            },
        }
    }

    pub fn with(mut self, h: GroupElem, a: Symbol) -> Result<Self> {
        self.set(h, a)?;
        Ok(self)
    }

    pub fn set(&mut self, h: GroupElem, a: Symbol) -> Result<()> {
        self.check_dim(&h)?;
        self.alphabet.check(a)?;
        self.symbols.insert(h, a);
        Ok(())
    }

    fn check_dim(&self, h: &GroupElem) -> Result<()> {
        if h.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                left: self.dim,
                right: h.dim(),
            });
        }
        Ok(())
    }

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn fill(&self) -> &Fill {
        &self.fill
    }

    pub fn explicit(&self) -> &BTreeMap<GroupElem, Symbol> {
        &self.symbols
    }

    fn fill_at(&self, h: &GroupElem) -> Symbol {
        match &self.fill {
            Fill::Constant(a) => *a,
            Fill::Sampled {
                seed,
                family,
                shift,
            } => {
                let src = h.sub_unchecked(shift);
                sample_symbol(*seed, &src, &family.factor(&src))
            }
        }
    }

    /// `x_h`.
    pub fn symbol_at(&self, h: &GroupElem) -> Symbol {
        match self.symbols.get(h) {
            Some(&a) => a,
            None => self.fill_at(h),
        }
    }

    pub fn symbol_at_z(&self, n: i64) -> Symbol {
        self.symbol_at(&GroupElem::scalar(n))
    }

    /// `x_{h - g}`, i.e. `(T_g x)_h`, without building the translate.
    pub fn symbol_translated(&self, h: &GroupElem, g: &GroupElem) -> Symbol {
        self.symbol_at(&h.sub_unchecked(g))
    }

    /// The point `T_g x`.
    pub fn translate(&self, g: &GroupElem) -> Result<Self> {
        self.check_dim(g)?;
        let symbols = self
            .symbols
            .iter()
            .map(|(h, &a)| (h.add_unchecked(g), a))
            .collect();
        let fill = match &self.fill {
            Fill::Constant(a) => Fill::Constant(*a),
            Fill::Sampled {
                seed,
                family,
                shift,
            } => Fill::Sampled {
                seed: *seed,
                family: family.clone(),
                shift: shift.add_unchecked(g),
            },
        };
        Ok(PatternPoint {
            alphabet: self.alphabet,
            dim: self.dim,
            symbols,
            fill,
        })
    }

    /// Make every coordinate of `window` explicit. Does not change the point.
    pub fn materialize(&mut self, window: &Window) -> Result<()> {
        if window.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                left: self.dim,
                right: window.dim(),
            });
        }
        for h in window.iter() {
            if !self.symbols.contains_key(&h) {
                let a = self.fill_at(&h);
                self.symbols.insert(h, a);
            }
        }
        Ok(())
    }

    /// `true` if the point lies in the cylinder `{x_h = a_h, h in coords}`.
    pub fn in_cylinder(&self, cyl: &[(GroupElem, Symbol)]) -> bool {
        cyl.iter().all(|(h, a)| self.symbol_at(h) == *a)
    }
}

/// A pair `(x, y)` with `y` equal to `x` off the finite set `F = keys(diff)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TailPair {
    base: PatternPoint,
    diff: BTreeMap<GroupElem, Symbol>,
}

impl TailPair {
    pub fn new(base: PatternPoint, diff: BTreeMap<GroupElem, Symbol>) -> Result<Self> {
        for (h, &a) in &diff {
            base.check_dim(h)?;
            base.alphabet.check(a)?;
            if base.symbol_at(h) == a {
                return Err(Error::InvalidPair(format!(
                    "y agrees with x at {h}; diff entries must actually differ"
                )));
            }
        }
        Ok(TailPair { base, diff })
    }

    /// The pair `(x, x)`.
    pub fn diagonal(base: PatternPoint) -> Self {
        TailPair {
            base,
            diff: BTreeMap::new(),
        }
    }

    /// The pair of two points with the same fill rule; they differ at most
    /// on their explicit coordinates.
    pub fn between(x: &PatternPoint, y: &PatternPoint) -> Result<Self> {
        if x.dim != y.dim || x.alphabet != y.alphabet {
            return Err(Error::NotEquivalent(
                "points live in different spaces".into(),
            ));
        }
        if x.fill != y.fill {
            return Err(Error::NotEquivalent(
                "fill rules differ, so the points may differ at infinitely many coordinates"
                    .into(),
            ));
        }
        let keys: BTreeSet<&GroupElem> = x.symbols.keys().chain(y.symbols.keys()).collect();
        let diff = keys
            .into_iter()
            .filter_map(|h| {
                let b = y.symbol_at(h);
                (x.symbol_at(h) != b).then(|| (h.clone(), b))
            })
            .collect();
        Ok(TailPair {
            base: x.clone(),
            diff,
        })
    }

    pub fn x(&self) -> &PatternPoint {
        &self.base
    }

    pub fn y(&self) -> PatternPoint {
        let mut y = self.base.clone();
        for (h, &a) in &self.diff {
            y.symbols.insert(h.clone(), a);
        }
        y
    }

    pub fn diff(&self) -> &BTreeMap<GroupElem, Symbol> {
        &self.diff
    }

    /// `F_{x,y}`.
    pub fn support(&self) -> impl Iterator<Item = &GroupElem> {
        self.diff.keys()
    }

    pub fn len(&self) -> usize {
        self.diff.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diff.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.base.dim
    }

    /// `(y, x)`.
    pub fn reversed(&self) -> Self {
        let diff = self
            .diff
            .keys()
            .map(|h| (h.clone(), self.base.symbol_at(h)))
            .collect();
        TailPair {
            base: self.y(),
            diff,
        }
    }

    /// `(T_g x, T_g y)`.
    pub fn translate(&self, g: &GroupElem) -> Result<Self> {
        let base = self.base.translate(g)?;
        let diff = self
            .diff
            .iter()
            .map(|(h, &a)| (h.add_unchecked(g), a))
            .collect();
        Ok(TailPair { base, diff })
    }
}

/// A positive cocycle value, stored as its logarithm. The true value lies in
/// `[exp(log_value - error_bound), exp(log_value + error_bound)]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CocycleValue {
    pub log_value: f64,
    pub error_bound: f64,
    pub exact: bool,
}

impl CocycleValue {
    pub fn exact(log_value: f64) -> Self {
        CocycleValue {
            log_value,
            error_bound: 0.0,
            exact: true,
        }
    }

    pub fn value(&self) -> f64 {
        self.log_value.exp()
    }

    pub fn interval(&self) -> (f64, f64) {
        (
            (self.log_value - self.error_bound).exp(),
            (self.log_value + self.error_bound).exp(),
        )
    }
}

fn check_pair(fam: &MeasureFamily, pair: &TailPair) -> Result<()> {
    if fam.dim() != pair.dim() {
        return Err(Error::DimensionMismatch {
            left: fam.dim(),
            right: pair.dim(),
        });
    }
    if fam.alphabet() != pair.base.alphabet {
        return Err(Error::InvalidPair(format!(
            "pair alphabet has {} symbols, family has {}",
            pair.base.alphabet.size(),
            fam.k()
        )));
    }
    Ok(())
}

/// `Delta(x, y) = prod_{h in F} mu_h(y_h) / mu_h(x_h)`.
pub fn tail_cocycle(fam: &MeasureFamily, pair: &TailPair) -> Result<CocycleValue> {
    check_pair(fam, pair)?;
    let log = pair
        .diff
        .iter()
        .map(|(h, &b)| fam.prob(h, b).ln() - fam.prob(h, pair.base.symbol_at(h)).ln())
        .sum();
    Ok(CocycleValue::exact(log))
}

/// `Delta(T_g x, T_g y) = prod_{h in F} mu_{h+g}(y_h) / mu_{h+g}(x_h)`.
pub fn shifted_tail_cocycle(
    fam: &MeasureFamily,
    pair: &TailPair,
    g: &GroupElem,
) -> Result<CocycleValue> {
    check_pair(fam, pair)?;
    if g.dim() != fam.dim() {
        return Err(Error::DimensionMismatch {
            left: fam.dim(),
            right: g.dim(),
        });
    }
    let log = pair
        .diff
        .iter()
        .map(|(h, &b)| {
            let k = h.add_unchecked(g);
            fam.prob(&k, b).ln() - fam.prob(&k, pair.base.symbol_at(h)).ln()
        })
        .sum();
    Ok(CocycleValue::exact(log))
}

/// Half-width of the log interval `[delta^{#F}, delta^{-#F}]`.
pub fn uniform_bound_log(delta: f64, support_size: usize) -> f64 {
    -(support_size as f64) * delta.ln()
}

/// A finite permutation of integers, stored as `k -> sigma(k)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(i64, i64)>", into = "Vec<(i64, i64)>")]
pub struct Permutation(BTreeMap<i64, i64>);

impl Permutation {
    pub fn new(map: BTreeMap<i64, i64>) -> Result<Self> {
        let image: BTreeSet<i64> = map.values().copied().collect();
        if image.len() != map.len() || !image.iter().all(|v| map.contains_key(v)) {
            return Err(Error::InvalidPermutation(
                "map is not a bijection of its domain".into(),
            ));
        }
        Ok(Permutation(map))
    }

    /// The permutation exchanging `a` and `b`.
    pub fn swap(a: i64, b: i64) -> Self {
        Permutation([(a, b), (b, a)].into_iter().collect())
    }

    pub fn identity_on(domain: impl IntoIterator<Item = i64>) -> Self {
        Permutation(domain.into_iter().map(|k| (k, k)).collect())
    }

    pub fn apply(&self, k: i64) -> i64 {
        self.0.get(&k).copied().unwrap_or(k)
    }

    pub fn inverse(&self) -> Self {
        Permutation(self.0.iter().map(|(&k, &v)| (v, k)).collect())
    }

    pub fn domain(&self) -> impl Iterator<Item = i64> + '_ {
        self.0.keys().copied()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `sum_k |sigma^{-1}(k) - k|`.
    pub fn displacement(&self) -> u64 {
        self.0.iter().map(|(&k, &v)| v.abs_diff(k)).sum()
    }

    pub fn max_displacement(&self) -> u64 {
        self.0.iter().map(|(&k, &v)| v.abs_diff(k)).max().unwrap_or(0)
    }
}

impl TryFrom<Vec<(i64, i64)>> for Permutation {
    type Error = Error;

    fn try_from(v: Vec<(i64, i64)>) -> Result<Self> {
        let n = v.len();
        let map: BTreeMap<i64, i64> = v.into_iter().collect();
        if map.len() != n {
            return Err(Error::InvalidPermutation("repeated domain element".into()));
        }
        Permutation::new(map)
    }
}

impl From<Permutation> for Vec<(i64, i64)> {
    fn from(p: Permutation) -> Self {
        p.0.into_iter().collect()
    }
}

/// The pair `(x, y)` with `y_k = x_{sigma(k)}` on the domain of `sigma`.
pub fn permuted_pair(x: &PatternPoint, sigma: &Permutation) -> Result<TailPair> {
    if x.dim != 1 {
        return Err(Error::NotOneDimensional);
    }
    let diff = sigma
        .0
        .iter()
        .filter_map(|(&k, &s)| {
            let a = x.symbol_at_z(s);
            (a != x.symbol_at_z(k)).then(|| (GroupElem::scalar(k), a))
        })
        .collect();
    TailPair::new(x.clone(), diff)
}

/// `Delta(T^n x, T^n y) = prod_{k in J} mu_{sigma^{-1}(k)+n}(x_k) / mu_{k+n}(x_k)`
/// for `y_k = x_{sigma(k)}`.
pub fn symmetric_shifted_cocycle(
    fam: &MeasureFamily,
    pair: &TailPair,
    sigma: &Permutation,
    n: i64,
) -> Result<CocycleValue> {
    check_pair(fam, pair)?;
    if fam.dim() != 1 {
        return Err(Error::NotOneDimensional);
    }
    for h in pair.support() {
        if !sigma.0.contains_key(&h.first()) {
            return Err(Error::InvalidPermutation(format!(
                "x and y differ at {h}, outside the domain of sigma"
            )));
        }
    }
    let x = pair.x();
    let y = pair.y();
    for (&k, &s) in &sigma.0 {
        if y.symbol_at_z(k) != x.symbol_at_z(s) {
            return Err(Error::InvalidPermutation(format!(
                "y_{k} != x_{s}: y is not x permuted by sigma"
            )));
        }
    }
    let inv = sigma.inverse();
    let log = sigma
        .0
        .keys()
        .map(|&k| {
            let a = x.symbol_at_z(k);
            fam.prob_z(inv.apply(k) + n, a).ln() - fam.prob_z(k + n, a).ln()
        })
        .sum();
    Ok(CocycleValue::exact(log))
}

/// Half-width of the log interval for the symmetric cocycle under a
/// one-step ratio bound `D`: `(#J)^2 log D`, or the sharp
/// `sum_k |sigma^{-1}(k) - k| log D`.
pub fn regular_bound_log(d: f64, sigma: &Permutation, sharp: bool) -> f64 {
    let e = if sharp {
        sigma.displacement() as f64
    } else {
        (sigma.len() as f64).powi(2)
    };
    e * d.ln()
}

/// Largest `n` for which every index `k + n` and `sigma^{-1}(k) + n`,
/// `k in J`, is `<= 0`, so only ratios `mu_k / mu_{k+1}` with `k < 0` enter.
pub fn negative_side_threshold(j: impl IntoIterator<Item = i64>) -> Option<i64> {
    j.into_iter().max().map(|m| -m)
}

/// Least `n` with `k + n > 0` for every `k in J`: `max(-min J, 0) + 1`.
pub fn positive_side_threshold(j: impl IntoIterator<Item = i64>) -> Option<i64> {
    j.into_iter().min().map(|m| (-m).max(0) + 1)
}

/// Support sizes beyond this are refused for exact evaluation.
const EXACT_SUPPORT_LIMIT: u128 = 10_000_000;

fn discrepancy(fam: &MeasureFamily, g: &GroupElem) -> Result<crate::measures::Support> {
    if g.dim() != fam.dim() {
        return Err(Error::DimensionMismatch {
            left: fam.dim(),
            right: g.dim(),
        });
    }
    fam.discrepancy_support(g).ok_or_else(|| {
        Error::RefusedTruncation(format!(
            "family {fam:?} has no certificate for where mu_(h+{g}) differs from mu_h"
        ))
    })
}

fn log_rn_term(fam: &MeasureFamily, g: &GroupElem, h: &GroupElem, a: Symbol) -> f64 {
    fam.prob(&h.add_unchecked(g), a).ln() - fam.prob(h, a).ln()
}

/// `d(mu o T_g)/dmu (x)` with the product truncated to `w`.
///
/// Only `h` in the discrepancy support of the family contribute; the part
/// outside `w` is bounded by `sum_{h notin w} max_a |log mu_{h+g}(a) - log
/// mu_h(a)|`. Families without a support certificate are refused.
pub fn rn_derivative(
    fam: &MeasureFamily,
    g: &GroupElem,
    x: &PatternPoint,
    w: &Window,
) -> Result<CocycleValue> {
    let supp = discrepancy(fam, g)?;
    if w.dim() != fam.dim() || x.dim != fam.dim() {
        return Err(Error::DimensionMismatch {
            left: fam.dim(),
            right: w.dim(),
        });
    }
    let log_value = supp
        .inside(w)
        .map(|h| log_rn_term(fam, g, &h, x.symbol_at(&h)))
        .sum();
    if supp.is_within(w) {
        return Ok(CocycleValue::exact(log_value));
    }
    let worst = |h: &GroupElem| {
        fam.alphabet()
            .symbols()
            .map(|a| log_rn_term(fam, g, h, a).abs())
            .fold(0.0, f64::max)
    };
    let error_bound = match fam.segments() {
        Some(seg) => {
            let (wl, wh) = (w.lo().first() as i128, w.hi().first() as i128);
            seg.pair_pieces(g.first(), i64::MIN as i128, i64::MAX as i128)
                .filter(|(_, _, p, q)| p != q)
                .map(|(lo, hi, _, _)| {
                    let overlap = (hi.min(wh) - lo.max(wl) + 1).max(0);
                    let outside = (hi - lo + 1) - overlap;
                    outside as f64 * worst(&GroupElem::scalar(lo as i64))
                })
                .sum()
        }
        None => supp.outside(w).map(|h| worst(&h)).sum(),
    };
    Ok(CocycleValue {
        log_value,
        error_bound,
        exact: false,
    })
}

/// `d(mu o T_g)/dmu (x)` over the whole discrepancy support.
pub fn rn_derivative_exact(
    fam: &MeasureFamily,
    g: &GroupElem,
    x: &PatternPoint,
) -> Result<CocycleValue> {
    let supp = discrepancy(fam, g)?;
    if supp.len() > EXACT_SUPPORT_LIMIT {
        return Err(Error::RefusedTruncation(format!(
            "discrepancy support of {} points is too large to enumerate; pass a window",
            supp.len()
        )));
    }
    Ok(CocycleValue::exact(
        supp.iter()
            .map(|h| log_rn_term(fam, g, &h, x.symbol_at(&h)))
            .sum(),
    ))
}
