//! Sampling from product measures and Radon-Nikodym weighted ratio averages
//! along Følner boxes.
//!
//! Sampling is counter based: the symbol at coordinate `h` of the point with
//! seed `s` is a pure function of `(s, h)`. A point therefore never needs a
//! coordinate cache; translates and concurrent readers see the same values
//! by construction.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cocycles::{rn_derivative_exact, tail_cocycle, PatternPoint, TailPair};
use crate::error::{Error, Result};
use crate::group::{AmenableGroup, FolnerSequence, GroupElem, Window};
use crate::measures::{Alphabet, MeasureFamily, ProbVector, Symbol};

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// The uniform variate attached to coordinate `h` of stream `seed`.
///
/// The ChaCha stream id is the first coordinate; a second coordinate selects
/// the block (ChaCha has a 64-bit block counter, so `Z^2` is covered without
/// collisions). Further coordinates are hashed into the block index.
pub fn coordinate_uniform(seed: u64, h: &GroupElem) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c = h.coords();
    rng.set_stream(c[0] as u64);
    if c.len() >= 2 {
        let block = if c.len() == 2 {
            c[1] as u64
        } else {
            c[2..]
                .iter()
                .fold(splitmix(c[1] as u64), |acc, &x| splitmix(acc ^ x as u64))
        };
        rng.set_word_pos((block as u128) << 4);
    }
    rng.gen::<f64>()
}

/// Inverse-CDF draw from `factor` with the coordinate's uniform variate.
pub fn sample_symbol(seed: u64, h: &GroupElem, factor: &[f64]) -> Symbol {
    let u = coordinate_uniform(seed, h);
    let mut acc = 0.0;
    for (a, &p) in factor.iter().enumerate() {
        acc += p;
        if u < acc {
            return a as Symbol;
        }
    }
    (factor.len() - 1) as Symbol
}

/// A seeded source of points distributed according to a family.
#[derive(Debug, Clone)]
pub struct SampleStream {
    pub seed: u64,
    pub family: MeasureFamily,
}

impl SampleStream {
    pub fn new(family: MeasureFamily, seed: u64) -> Self {
        SampleStream { seed, family }
    }

    /// The lazily evaluated point.
    pub fn point(&self) -> PatternPoint {
        PatternPoint::sampled(&self.family, self.seed)
    }
}

/// The point of `stream` with every coordinate of `window` materialized.
pub fn sample_point(stream: &SampleStream, window: &Window) -> Result<PatternPoint> {
    let mut p = stream.point();
    p.materialize(window)?;
    Ok(p)
}

/// A function of finitely many coordinates, `f(x) = table[x_{h_0} + k x_{h_1} + ...]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CylinderFunction {
    coords: Vec<GroupElem>,
    k: usize,
    table: Vec<f64>,
}

impl CylinderFunction {
    pub fn new(coords: Vec<GroupElem>, alphabet: Alphabet, table: Vec<f64>) -> Result<Self> {
        let k = alphabet.size();
        let expected = (k as u64)
            .checked_pow(coords.len() as u32)
            .filter(|&n| n <= 1 << 24)
            .ok_or_else(|| Error::param("window", "cylinder window too large"))?;
        if table.len() as u64 != expected {
            return Err(Error::param(
                "table",
                format!("need {expected} entries, got {}", table.len()),
            ));
        }
        if let Some(h) = coords.first() {
            if coords.iter().any(|g| g.dim() != h.dim()) {
                return Err(Error::param("window", "mixed dimensions"));
            }
        }
        let mut sorted = coords.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != coords.len() {
            return Err(Error::param("window", "repeated coordinate"));
        }
        if table.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("table", "entries must be finite"));
        }
        Ok(CylinderFunction { coords, k, table })
    }

    pub fn from_fn(
        coords: Vec<GroupElem>,
        alphabet: Alphabet,
        f: impl Fn(&[Symbol]) -> f64,
    ) -> Result<Self> {
        let k = alphabet.size();
        let n = coords.len();
        let size = k.checked_pow(n as u32).unwrap_or(usize::MAX).min(1 << 25);
        let table = (0..size).map(|i| f(&decode(i, k, n))).collect();
        CylinderFunction::new(coords, alphabet, table)
    }

    pub fn constant(c: f64, alphabet: Alphabet) -> Self {
        CylinderFunction {
            coords: Vec::new(),
            k: alphabet.size(),
            table: vec![c],
        }
    }

    /// `1{x_h = a}`.
    pub fn indicator(h: GroupElem, a: Symbol, alphabet: Alphabet) -> Result<Self> {
        alphabet.check(a)?;
        CylinderFunction::from_fn(vec![h], alphabet, |s| (s[0] == a) as u8 as f64)
    }

    pub fn coords(&self) -> &[GroupElem] {
        &self.coords
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    pub fn alphabet_size(&self) -> usize {
        self.k
    }

    pub fn min(&self) -> f64 {
        self.table.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.table.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn value(&self, symbols: &[Symbol]) -> f64 {
        let idx = symbols
            .iter()
            .rev()
            .fold(0usize, |acc, &a| acc * self.k + a as usize);
        self.table[idx]
    }

    pub fn eval(&self, x: &PatternPoint) -> f64 {
        let syms: Vec<Symbol> = self.coords.iter().map(|h| x.symbol_at(h)).collect();
        self.value(&syms)
    }

    /// `f(T_g x)`.
    pub fn eval_shifted(&self, x: &PatternPoint, g: &GroupElem) -> f64 {
        let syms: Vec<Symbol> = self
            .coords
            .iter()
            .map(|h| x.symbol_translated(h, g))
            .collect();
        self.value(&syms)
    }

    /// `E_mu[f]` by enumeration of the window.
    pub fn expectation(&self, fam: &MeasureFamily) -> f64 {
        let n = self.coords.len();
        let factors: Vec<_> = self.coords.iter().map(|h| fam.factor(h)).collect();
        (0..self.table.len())
            .map(|i| {
                let s = decode(i, self.k, n);
                let p: f64 = s.iter().zip(&factors).map(|(&a, f)| f[a as usize]).product();
                self.table[i] * p
            })
            .sum()
    }
}

fn decode(mut i: usize, k: usize, n: usize) -> Vec<Symbol> {
    (0..n)
        .map(|_| {
            let a = (i % k) as Symbol;
            i /= k;
            a
        })
        .collect()
}

/// `sum v_i w_i / sum w_i` with `w_i = exp(log_w_i)`, normalized by the
/// largest weight and clamped to `[min v, max v]`.
pub fn ratio_quotient(values: &[f64], log_weights: &[f64]) -> f64 {
    assert_eq!(values.len(), log_weights.len());
    assert!(!values.is_empty());
    let m = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (mut num, mut den) = (0.0, 0.0);
    for (v, lw) in values.iter().zip(log_weights) {
        let w = (lw - m).exp();
        num += v * w;
        den += w;
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (num / den).clamp(lo, hi)
}

/// Largest discrepancy support used for the one-step chain on Z.
const CHAIN_SUPPORT_LIMIT: u128 = 1_000_000;

/// `log d(mu o T_g)/dmu (x)` for every `g` in `[-r, r]^d`, in
/// [`Window::iter`] order.
///
/// On Z the weights follow the cocycle chain `w_{g+1}(x) = w_1(T_g x) w_g(x)`
/// (and its mirror for negative `g`), which costs one pass over the
/// discrepancy support of the unit shifts per step.
pub fn log_weights(fam: &MeasureFamily, x: &PatternPoint, r: u64) -> Result<Vec<(GroupElem, f64)>> {
    let dim = fam.dim();
    let r = r as i64;
    if dim == 1 {
        if let Some(steps) = unit_steps(fam)? {
            let mut out = vec![0.0; (2 * r + 1) as usize];
            let mid = r as usize;
            for g in 0..r {
                let i = mid + g as usize;
                out[i + 1] = out[i] + step_log(&steps.0, x, g);
            }
            for g in (-r + 1..=0).rev() {
                let i = (mid as i64 + g) as usize;
                out[i - 1] = out[i] + step_log(&steps.1, x, g);
            }
            return Ok((-r..=r).map(GroupElem::scalar).zip(out).collect());
        }
    }
    Window::centered(dim, r)
        .iter()
        .map(|g| {
            let lw = rn_derivative_exact(fam, &g, x)?.log_value;
            Ok((g, lw))
        })
        .collect()
}

/// Per-support-point log ratios `log mu_{h+s}(a) - log mu_h(a)` for `s = +1`
/// and `s = -1`.
type StepTable = Vec<(GroupElem, Vec<f64>)>;

fn unit_steps(fam: &MeasureFamily) -> Result<Option<(StepTable, StepTable)>> {
    let table = |s: i64| -> Result<Option<StepTable>> {
        let g = GroupElem::scalar(s);
        let Some(supp) = fam.discrepancy_support(&g) else {
            return Err(Error::RefusedTruncation(format!(
                "family {fam:?} has no discrepancy certificate for the unit shift"
            )));
        };
        if supp.len() > CHAIN_SUPPORT_LIMIT {
            return Ok(None);
        }
        Ok(Some(
            supp.iter()
                .map(|h| {
                    let (p, q) = (fam.factor(&h), fam.factor(&h.add_unchecked(&g)));
                    let lr = p.iter().zip(&q).map(|(a, b)| b.ln() - a.ln()).collect();
                    (h, lr)
                })
                .collect(),
        ))
    };
    Ok(match (table(1)?, table(-1)?) {
        (Some(a), Some(b)) => Some((a, b)),
        _ => None,
    })
}

/// `log w_s(T_g x)` for the unit step `s` encoded in `steps`.
fn step_log(steps: &StepTable, x: &PatternPoint, g: i64) -> f64 {
    let g = GroupElem::scalar(g);
    steps
        .iter()
        .map(|(h, lr)| lr[x.symbol_translated(h, &g) as usize])
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioAverageReport {
    pub radii: Vec<u64>,
    pub set_sizes: Vec<u64>,
    /// The quotient of weighted sums along each Følner set.
    pub quotients: Vec<f64>,
    /// `log sum_{g in F_n} w_g(x)`.
    pub log_weight_sums: Vec<f64>,
    /// `|q_i - q_{i-1}|`, the Cauchy diagnostic along the sequence.
    pub increments: Vec<f64>,
    pub f_min: f64,
    pub f_max: f64,
}

fn log_sum_exp(lw: &[f64]) -> f64 {
    let m = lw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + lw.iter().map(|l| (l - m).exp()).sum::<f64>().ln()
}

fn check_folner(fam: &MeasureFamily, folner: &FolnerSequence) -> Result<()> {
    if folner.model().dim() != fam.dim() {
        return Err(Error::DimensionMismatch {
            left: fam.dim(),
            right: folner.model().dim(),
        });
    }
    Ok(())
}

/// Weighted averages of `value(g)` over every set of the sequence, given the
/// log weights on the largest one.
fn averages_along(
    folner: &FolnerSequence,
    weights: &[(GroupElem, f64)],
    value: impl Fn(&GroupElem) -> f64,
    f_min: f64,
    f_max: f64,
) -> RatioAverageReport {
    let values: Vec<f64> = weights.iter().map(|(g, _)| value(g)).collect();
    let mut report = RatioAverageReport {
        radii: folner.radii().to_vec(),
        set_sizes: (0..folner.len()).map(|i| folner.set_size(i)).collect(),
        quotients: Vec::new(),
        log_weight_sums: Vec::new(),
        increments: Vec::new(),
        f_min,
        f_max,
    };
    for &r in folner.radii() {
        let (v, lw): (Vec<f64>, Vec<f64>) = weights
            .iter()
            .zip(&values)
            .filter(|((g, _), _)| g.norm_inf() <= r as i64)
            .map(|((_, l), v)| (*v, *l))
            .unzip();
        let q = ratio_quotient(&v, &lw);
        if let Some(prev) = report.quotients.last() {
            report.increments.push((q - prev).abs());
        }
        report.quotients.push(q);
        report.log_weight_sums.push(log_sum_exp(&lw));
    }
    report
}

/// The ratio averages `sum_{g in F_n} f(T_g x) w_g(x) / sum_{g in F_n} w_g(x)`
/// with `w_g = d(mu o T_g)/dmu`, along every set of `folner`.
pub fn ratio_average(
    fam: &MeasureFamily,
    f: &CylinderFunction,
    x: &PatternPoint,
    folner: &FolnerSequence,
) -> Result<RatioAverageReport> {
    check_folner(fam, folner)?;
    if f.alphabet_size() != fam.k() {
        return Err(Error::param("f", "alphabet differs from the family's"));
    }
    let weights = log_weights(fam, x, *folner.radii().last().unwrap())?;
    Ok(averages_along(
        folner,
        &weights,
        |g| f.eval_shifted(x, g),
        f.min(),
        f.max(),
    ))
}

/// `sum_y f(y) Delta(x, y) / sum_y Delta(x, y)` over a finite list of points
/// tail-equivalent to `x`.
pub fn finite_relation_expectation(
    fam: &MeasureFamily,
    x: &PatternPoint,
    class: &[PatternPoint],
    f: &CylinderFunction,
) -> Result<f64> {
    if class.is_empty() {
        return Err(Error::EmptySet);
    }
    let mut values = Vec::with_capacity(class.len());
    let mut lw = Vec::with_capacity(class.len());
    for y in class {
        let pair = TailPair::between(x, y)?;
        lw.push(tail_cocycle(fam, &pair)?.log_value);
        values.push(f.eval(y));
    }
    Ok(ratio_quotient(&values, &lw))
}

/// Both sides of `E[f o T_g * d(mu o T_g)/dmu] = E[f]`, the left one by full
/// enumeration of the coordinates it depends on.
pub fn change_of_variables(
    fam: &MeasureFamily,
    f: &CylinderFunction,
    g: &GroupElem,
) -> Result<(f64, f64)> {
    let supp = fam.discrepancy_support(g).ok_or_else(|| {
        Error::RefusedTruncation("family has no discrepancy certificate".into())
    })?;
    let mut coords: Vec<GroupElem> = supp.iter().collect();
    coords.extend(f.coords().iter().map(|h| h.sub_unchecked(g)));
    coords.sort();
    coords.dedup();
    let k = fam.k();
    let total = k
        .checked_pow(coords.len() as u32)
        .filter(|&n| n <= 1 << 22)
        .ok_or_else(|| Error::param("window", "too many configurations to enumerate"))?;
    let factors: Vec<_> = coords.iter().map(|h| fam.factor(h)).collect();
    let mut lhs = 0.0;
    for i in 0..total {
        let s = decode(i, k, coords.len());
        let mut x = PatternPoint::constant(fam.alphabet(), fam.dim(), 0)?;
        for (h, &a) in coords.iter().zip(&s) {
            x.set(h.clone(), a)?;
        }
        let p: f64 = s.iter().zip(&factors).map(|(&a, q)| q[a as usize]).product();
        let w = rn_derivative_exact(fam, g, &x)?.value();
        lhs += f.eval_shifted(&x, g) * w * p;
    }
    Ok((lhs, f.expectation(fam)))
}

/// Seed of the measure-preserving factor paired with seed `s`.
fn pmp_seed(s: u64) -> u64 {
    splitmix(s ^ 0x5851_F42D_4C95_7F2D)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakMixingStart {
    pub seed: u64,
    pub quotients: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakMixingReport {
    pub radii: Vec<u64>,
    pub starts: Vec<WeakMixingStart>,
    /// Largest `|q_s - q_t|` between final quotients of two starts.
    pub max_discrepancy: f64,
    /// `E[f] E[h]` when the family is stationary.
    pub expected: Option<f64>,
}

/// Ratio averages of `f (x) h` along the product of the shift with a
/// stationary Bernoulli shift `R` with marginal `pmp`, one start per seed.
/// Starts run in parallel; each start is `(x, y)` with `x ~ mu` and
/// `y ~ pmp^G` drawn from the seed.
pub fn product_weak_mixing_probe(
    fam: &MeasureFamily,
    pmp: &ProbVector,
    f: &CylinderFunction,
    h: &CylinderFunction,
    folner: &FolnerSequence,
    seeds: &[u64],
) -> Result<WeakMixingReport> {
    check_folner(fam, folner)?;
    if seeds.is_empty() {
        return Err(Error::param("seeds", "need at least one seed"));
    }
    if f.alphabet_size() != fam.k() || h.alphabet_size() != pmp.len() {
        return Err(Error::param("f", "cylinder alphabets differ from the factors'"));
    }
    let other = MeasureFamily::stationary(pmp.clone(), fam.dim());
    let lo = (f.min() * h.min()).min(f.min() * h.max()).min(f.max() * h.min()).min(f.max() * h.max());
    let hi = (f.min() * h.min()).max(f.min() * h.max()).max(f.max() * h.min()).max(f.max() * h.max());
    let r = *folner.radii().last().unwrap();
    let starts = seeds
        .par_iter()
        .map(|&seed| {
            let x = PatternPoint::sampled(fam, seed);
            let y = PatternPoint::sampled(&other, pmp_seed(seed));
            let weights = log_weights(fam, &x, r)?;
            let rep = averages_along(
                folner,
                &weights,
                |g| f.eval_shifted(&x, g) * h.eval_shifted(&y, g),
                lo,
                hi,
            );
            Ok(WeakMixingStart {
                seed,
                quotients: rep.quotients,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let finals: Vec<f64> = starts.iter().map(|s| *s.quotients.last().unwrap()).collect();
    let max_discrepancy = finals
        .iter()
        .flat_map(|a| finals.iter().map(move |b| (a - b).abs()))
        .fold(0.0, f64::max);
    let expected = fam
        .is_stationary()
        .then(|| f.expectation(fam) * h.expectation(&other));
    Ok(WeakMixingReport {
        radii: folner.radii().to_vec(),
        starts,
        max_discrepancy,
        expected,
    })
}
