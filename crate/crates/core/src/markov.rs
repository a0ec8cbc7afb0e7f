//! Inhomogeneous Markov measures on the path space `X_M` of a 0/1 structure
//! matrix `M`.
//!
//! A [`MarkovSpec`] is inhomogeneous on a finite window `[start, end)` of
//! transition indices and homogeneous outside it: to the left the chain is
//! stationary (`pi_n = pi_L`, `P_n = P_L`), to the right the transition
//! matrix is `P_R` and the marginals are propagated forward,
//! `pi_{n+1} = pi_n P_R`. The cylinder measure is
//!
//! ```text
//! mu([a]_i^j) = pi_i(a_i) P_i(a_i, a_{i+1}) ... P_{j-1}(a_{j-1}, a_j)
//! ```
//!
//! and for paths that agree off a finite range the tail cocycle is the finite
//! product `prod_i P_i(y_i, y_{i+1}) / P_i(x_i, x_{i+1})`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::cocycles::CocycleValue;
use crate::error::{Error, Result};
use crate::measures::{MeasureFamily, Symbol};

const TOL: f64 = 1e-12;

/// Above this many steps right-tail marginals are computed by repeated
/// squaring instead of step-by-step propagation.
const PROPAGATION_LIMIT: u64 = 4096;

/// Row-major square matrix.
#[derive(Debug, Clone, PartialEq)]
struct Mat {
    s: usize,
    data: Vec<f64>,
}

impl Mat {
    fn from_rows(rows: &[Vec<f64>]) -> Self {
        Mat {
            s: rows.len(),
            data: rows.iter().flatten().copied().collect(),
        }
    }

    fn rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.s).map(|r| r.to_vec()).collect()
    }

    fn get(&self, a: usize, b: usize) -> f64 {
        self.data[a * self.s + b]
    }

    fn to_na(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.s, self.s, &self.data)
    }

    fn left_mul(&self, pi: &[f64]) -> Vec<f64> {
        (0..self.s)
            .map(|b| (0..self.s).map(|a| pi[a] * self.get(a, b)).sum())
            .collect()
    }
}

/// Serializable form of a [`MarkovSpec`], as it appears in experiment
/// configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkovConfig {
    /// 0/1 structure matrix.
    pub structure: Vec<Vec<u8>>,
    /// Transition matrix of the stationary left tail.
    pub left: Vec<Vec<f64>>,
    /// Stationary vector of `left`; solved for when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub left_pi: Option<Vec<f64>>,
    /// Index of the first window transition matrix.
    #[serde(default)]
    pub start: i64,
    /// `P_start, P_{start+1}, ...`
    #[serde(default)]
    pub window: Vec<Vec<Vec<f64>>>,
    /// Transition matrix right of the window; defaults to `left`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub right: Option<Vec<Vec<f64>>>,
    /// Explicit marginals `pi_start ..= pi_end`; checked against
    /// `pi_n P_n = pi_{n+1}` when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub marginals: Option<Vec<Vec<f64>>>,
    /// Index translation: the spec describes `n -> (pi_{n+offset}, P_{n+offset})`.
    #[serde(default)]
    pub offset: i64,
}

/// A validated inhomogeneous Markov measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MarkovConfig", into = "MarkovConfig")]
pub struct MarkovSpec {
    structure: Vec<Vec<bool>>,
    left: Mat,
    left_pi: Vec<f64>,
    start: i64,
    window: Vec<Mat>,
    right: Mat,
    /// `pi_start ..= pi_end`
    marginals: Vec<Vec<f64>>,
    explicit_marginals: bool,
    explicit_left_pi: bool,
    offset: i64,
}

fn check_prob(pi: &[f64], s: usize, index: i64, what: &str) -> Result<()> {
    let bad = |reason: String| Error::InvalidMarkov { index, reason };
    if pi.len() != s {
        return Err(bad(format!("{what} has {} entries, expected {s}", pi.len())));
    }
    if pi.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(bad(format!("{what} has a negative or non-finite entry")));
    }
    let total: f64 = pi.iter().sum();
    if (total - 1.0).abs() > TOL {
        return Err(bad(format!("{what} sums to {total}")));
    }
    Ok(())
}

fn check_transition(p: &[Vec<f64>], m: &[Vec<bool>], index: i64) -> Result<Mat> {
    let s = m.len();
    let bad = |reason: String| Error::InvalidMarkov { index, reason };
    if p.len() != s || p.iter().any(|r| r.len() != s) {
        return Err(bad(format!("transition matrix is not {s}x{s}")));
    }
    for (a, row) in p.iter().enumerate() {
        let total: f64 = row.iter().sum();
        if (total - 1.0).abs() > TOL {
            return Err(bad(format!("row {a} sums to {total}")));
        }
        for (b, &v) in row.iter().enumerate() {
            if !v.is_finite() || !(0.0..=1.0).contains(&v) {
                return Err(bad(format!("entry ({a},{b}) = {v} is not a probability")));
            }
            if (v > 0.0) != m[a][b] {
                return Err(bad(format!(
                    "entry ({a},{b}) = {v} disagrees with structure bit {}",
                    m[a][b] as u8
                )));
            }
        }
    }
    Ok(Mat::from_rows(p))
}

fn max_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Stationary vector of a row-stochastic matrix: solves `pi (P - I) = 0`
/// with the last equation replaced by `sum pi = 1`. Fails when the solution
/// is not unique.
pub fn stationary_distribution(p: &[Vec<f64>]) -> Result<Vec<f64>> {
    let s = p.len();
    if s == 0 {
        return Err(Error::EmptySet);
    }
    let mut a = Mat::from_rows(p).to_na().transpose() - DMatrix::<f64>::identity(s, s);
    for j in 0..s {
        a[(s - 1, j)] = 1.0;
    }
    let mut rhs = DVector::<f64>::zeros(s);
    rhs[s - 1] = 1.0;
    let pi = a
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::param("left", "stationary distribution is not unique"))?;
    Ok(pi.iter().map(|v| v.max(0.0)).collect())
}

impl TryFrom<MarkovConfig> for MarkovSpec {
    type Error = Error;

    fn try_from(c: MarkovConfig) -> Result<Self> {
        let s = c.structure.len();
        if !(1..=256).contains(&s) {
            return Err(Error::AlphabetSize(s));
        }
        if c.structure.iter().any(|r| r.len() != s) {
            return Err(Error::param("structure", format!("structure matrix is not {s}x{s}")));
        }
        if c.structure.iter().flatten().any(|&v| v > 1) {
            return Err(Error::param("structure", "entries must be 0 or 1"));
        }
        let m: Vec<Vec<bool>> = c
            .structure
            .iter()
            .map(|r| r.iter().map(|&v| v == 1).collect())
            .collect();
        let before = c.start - 1;
        let left = check_transition(&c.left, &m, before)?;
        let explicit_left_pi = c.left_pi.is_some();
        let left_pi = match c.left_pi {
            Some(pi) => pi,
            None => stationary_distribution(&c.left)?,
        };
        check_prob(&left_pi, s, before, "left marginal")?;
        let gap = max_gap(&left.left_mul(&left_pi), &left_pi);
        if gap > TOL {
            return Err(Error::InvalidMarkov {
                index: before,
                reason: format!("left marginal is not stationary (off by {gap:.3e})"),
            });
        }
        let window = c
            .window
            .iter()
            .enumerate()
            .map(|(i, p)| check_transition(p, &m, c.start + i as i64))
            .collect::<Result<Vec<_>>>()?;
        let end = c.start + window.len() as i64;
        let right = match &c.right {
            Some(p) => check_transition(p, &m, end)?,
            None => left.clone(),
        };
        let explicit_marginals = c.marginals.is_some();
        let marginals = match c.marginals {
            Some(pis) => {
                if pis.len() != window.len() + 1 {
                    return Err(Error::InvalidMarkov {
                        index: c.start,
                        reason: format!(
                            "expected {} marginals for the window, got {}",
                            window.len() + 1,
                            pis.len()
                        ),
                    });
                }
                for (i, pi) in pis.iter().enumerate() {
                    check_prob(pi, s, c.start + i as i64, "marginal")?;
                }
                if max_gap(&pis[0], &left_pi) > TOL {
                    return Err(Error::InvalidMarkov {
                        index: before,
                        reason: "pi_{n} P_{n} != pi_{n+1}".into(),
                    });
                }
                for (i, p) in window.iter().enumerate() {
                    if max_gap(&p.left_mul(&pis[i]), &pis[i + 1]) > TOL {
                        return Err(Error::InvalidMarkov {
                            index: c.start + i as i64,
                            reason: "pi_{n} P_{n} != pi_{n+1}".into(),
                        });
                    }
                }
                pis
            }
            None => {
                let mut pis = vec![left_pi.clone()];
                for p in &window {
                    let next = p.left_mul(pis.last().unwrap());
                    pis.push(next);
                }
                pis
            }
        };
        Ok(MarkovSpec {
            structure: m,
            left,
            left_pi,
            start: c.start,
            window,
            right,
            marginals,
            explicit_marginals,
            explicit_left_pi,
            offset: c.offset,
        })
    }
}

impl From<MarkovSpec> for MarkovConfig {
    fn from(m: MarkovSpec) -> Self {
        MarkovConfig {
            structure: m
                .structure
                .iter()
                .map(|r| r.iter().map(|&b| b as u8).collect())
                .collect(),
            left: m.left.rows(),
            left_pi: m.explicit_left_pi.then(|| m.left_pi.clone()),
            start: m.start,
            window: m.window.iter().map(Mat::rows).collect(),
            right: (m.right != m.left).then(|| m.right.rows()),
            marginals: m.explicit_marginals.then(|| m.marginals.clone()),
            offset: m.offset,
        }
    }
}

impl MarkovSpec {
    /// Homogeneous stationary chain with transition matrix `p`; the
    /// structure matrix is read off the support of `p`.
    pub fn stationary(p: Vec<Vec<f64>>) -> Result<Self> {
        let structure = p
            .iter()
            .map(|r| r.iter().map(|&v| (v > 0.0) as u8).collect())
            .collect();
        MarkovConfig {
            structure,
            left: p,
            left_pi: None,
            start: 0,
            window: Vec::new(),
            right: None,
            marginals: None,
            offset: 0,
        }
        .try_into()
    }

    /// The chain of a one-dimensional product family on `[lo, hi]`:
    /// `pi_n = mu_n` and every row of `P_n` equals `mu_{n+1}`, with the
    /// factors frozen at `mu_lo` to the left and `mu_hi` to the right.
    pub fn from_product_family(fam: &MeasureFamily, lo: i64, hi: i64) -> Result<Self> {
        if fam.dim() != 1 {
            return Err(Error::NotOneDimensional);
        }
        if hi < lo {
            return Err(Error::param("window", format!("empty range [{lo}, {hi}]")));
        }
        let k = fam.k();
        let rows = |n: i64| -> Vec<Vec<f64>> {
            let f = fam.factor_z(n);
            vec![f.to_vec(); k]
        };
        MarkovConfig {
            structure: vec![vec![1; k]; k],
            left: rows(lo),
            left_pi: Some(fam.factor_z(lo).to_vec()),
            start: lo,
            window: (lo..hi).map(|n| rows(n + 1)).collect(),
            right: Some(rows(hi)),
            marginals: None,
            offset: 0,
        }
        .try_into()
    }

    pub fn states(&self) -> usize {
        self.structure.len()
    }

    pub fn structure(&self) -> &[Vec<bool>] {
        &self.structure
    }

    pub fn offset(&self) -> i64 {
        self.offset
    }

    /// Transition indices `[start, end)` carrying window matrices, in the
    /// spec's own (untranslated) coordinates.
    pub fn window(&self) -> (i64, i64) {
        (self.start, self.start + self.window.len() as i64)
    }

    /// The spec with indices moved by `n`: `(pi'_i, P'_i) = (pi_{i+n}, P_{i+n})`.
    pub fn translated(&self, n: i64) -> Self {
        let mut t = self.clone();
        t.offset += n;
        t
    }

    fn mat(&self, n: i64) -> &Mat {
        let n = n + self.offset;
        let (lo, hi) = self.window();
        if n < lo {
            &self.left
        } else if n >= hi {
            &self.right
        } else {
            &self.window[(n - lo) as usize]
        }
    }

    /// `P_n(a, b)`.
    pub fn transition(&self, n: i64, a: Symbol, b: Symbol) -> f64 {
        self.mat(n).get(a as usize, b as usize)
    }

    /// `P_n` as rows.
    pub fn transition_matrix(&self, n: i64) -> Vec<Vec<f64>> {
        self.mat(n).rows()
    }

    /// The marginal `pi_n`.
    pub fn marginal(&self, n: i64) -> Vec<f64> {
        let n = n + self.offset;
        let (lo, hi) = self.window();
        if n < lo {
            return self.left_pi.clone();
        }
        if n <= hi {
            return self.marginals[(n - lo) as usize].clone();
        }
        let steps = (n - hi) as u64;
        let mut pi = self.marginals.last().unwrap().clone();
        if steps <= PROPAGATION_LIMIT {
            for _ in 0..steps {
                pi = self.right.left_mul(&pi);
            }
            pi
        } else {
            let mut pow = self.right.to_na();
            let mut acc = DMatrix::<f64>::identity(self.states(), self.states());
            let mut e = steps;
            while e > 0 {
                if e & 1 == 1 {
                    acc = &acc * &pow;
                }
                pow = &pow * &pow;
                e >>= 1;
            }
            let row = DVector::from_vec(pi).transpose() * acc;
            row.iter().copied().collect()
        }
    }

    pub fn allowed(&self, a: Symbol, b: Symbol) -> bool {
        self.structure
            .get(a as usize)
            .and_then(|r| r.get(b as usize))
            .copied()
            .unwrap_or(false)
    }

    fn check_path(&self, start: i64, symbols: &[Symbol]) -> Result<()> {
        let s = self.states();
        if let Some(&a) = symbols.iter().find(|&&a| a as usize >= s) {
            return Err(Error::SymbolOutOfRange {
                symbol: a as usize,
                size: s,
            });
        }
        for (l, w) in symbols.windows(2).enumerate() {
            if !self.allowed(w[0], w[1]) {
                return Err(Error::Inadmissible {
                    index: start + l as i64,
                    from: w[0] as usize,
                    to: w[1] as usize,
                });
            }
        }
        Ok(())
    }
}

/// The cylinder `[a]_i^j = {x : x_l = a_l, i <= l <= j}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathCylinder {
    pub start: i64,
    pub symbols: Vec<Symbol>,
}

impl PathCylinder {
    pub fn new(start: i64, symbols: Vec<Symbol>) -> Result<Self> {
        if symbols.is_empty() {
            return Err(Error::EmptySet);
        }
        Ok(PathCylinder { start, symbols })
    }

    /// Last index `j`.
    pub fn end(&self) -> i64 {
        self.start + self.symbols.len() as i64 - 1
    }

    pub fn extended_right(&self, b: Symbol) -> Self {
        let mut symbols = self.symbols.clone();
        symbols.push(b);
        PathCylinder {
            start: self.start,
            symbols,
        }
    }

    pub fn extended_left(&self, b: Symbol) -> Self {
        let mut symbols = vec![b];
        symbols.extend_from_slice(&self.symbols);
        PathCylinder {
            start: self.start - 1,
            symbols,
        }
    }
}

/// `mu([a]_i^j)`; errors on paths forbidden by `M`.
pub fn markov_measure(spec: &MarkovSpec, cyl: &PathCylinder) -> Result<f64> {
    spec.check_path(cyl.start, &cyl.symbols)?;
    let pi = spec.marginal(cyl.start);
    let mut v = pi[cyl.symbols[0] as usize];
    for (l, w) in cyl.symbols.windows(2).enumerate() {
        v *= spec.transition(cyl.start + l as i64, w[0], w[1]);
    }
    Ok(v)
}

/// Two bi-infinite paths that agree outside `[start, start + len)`. Only
/// that stretch is stored; its end symbols are common to both paths, so the
/// transitions leaving the stretch coincide.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MarkovPair {
    start: i64,
    x: Vec<Symbol>,
    y: Vec<Symbol>,
}

impl MarkovPair {
    pub fn new(start: i64, x: Vec<Symbol>, y: Vec<Symbol>) -> Result<Self> {
        if x.is_empty() {
            return Err(Error::EmptySet);
        }
        if x.len() != y.len() {
            return Err(Error::InvalidPair(format!(
                "stretches have lengths {} and {}",
                x.len(),
                y.len()
            )));
        }
        if x[0] != y[0] || x.last() != y.last() {
            return Err(Error::InvalidPair(
                "paths must agree at both ends of the stored stretch".into(),
            ));
        }
        Ok(MarkovPair { start, x, y })
    }

    pub fn diagonal(start: i64, x: Vec<Symbol>) -> Result<Self> {
        MarkovPair::new(start, x.clone(), x)
    }

    pub fn start(&self) -> i64 {
        self.start
    }

    pub fn x(&self) -> &[Symbol] {
        &self.x
    }

    pub fn y(&self) -> &[Symbol] {
        &self.y
    }

    /// Number of coordinates where the paths differ.
    pub fn differing(&self) -> usize {
        self.x.iter().zip(&self.y).filter(|(a, b)| a != b).count()
    }

    pub fn reversed(&self) -> Self {
        MarkovPair {
            start: self.start,
            x: self.y.clone(),
            y: self.x.clone(),
        }
    }

    /// `(T^n x, T^n y)`, where `(T^n x)_i = x_{i-n}`.
    pub fn translate(&self, n: i64) -> Self {
        MarkovPair {
            start: self.start + n,
            ..self.clone()
        }
    }
}

/// `Delta(x, y) = prod_i P_i(y_i, y_{i+1}) / P_i(x_i, x_{i+1})`, exact over
/// the stored stretch.
pub fn markov_tail_cocycle(spec: &MarkovSpec, pair: &MarkovPair) -> Result<CocycleValue> {
    spec.check_path(pair.start, &pair.x)?;
    spec.check_path(pair.start, &pair.y)?;
    let mut log = 0.0;
    for l in 0..pair.x.len() - 1 {
        let (xa, xb, ya, yb) = (pair.x[l], pair.x[l + 1], pair.y[l], pair.y[l + 1]);
        if (xa, xb) == (ya, yb) {
            continue;
        }
        let n = pair.start + l as i64;
        log += spec.transition(n, ya, yb).ln() - spec.transition(n, xa, xb).ln();
    }
    Ok(CocycleValue::exact(log))
}

/// `Delta(T^n x, T^n y) = prod_i P_{i+n}(y_i, y_{i+1}) / P_{i+n}(x_i, x_{i+1})`.
pub fn markov_shifted_cocycle(spec: &MarkovSpec, pair: &MarkovPair, n: i64) -> Result<CocycleValue> {
    markov_tail_cocycle(&spec.translated(n), pair)
}

/// Least `n >= 1` with every entry of `M^n` positive, searched up to the
/// Wielandt bound `(s - 1)^2 + 1`; `None` means not primitive.
pub fn primitivity(m: &[Vec<bool>]) -> Option<usize> {
    let s = m.len();
    if s == 0 || m.iter().any(|r| r.len() != s) {
        return None;
    }
    let bound = (s - 1) * (s - 1) + 1;
    let mut pow = m.to_vec();
    for n in 1..=bound {
        if pow.iter().flatten().all(|&v| v) {
            return Some(n);
        }
        pow = (0..s)
            .map(|a| {
                (0..s)
                    .map(|b| (0..s).any(|c| pow[a][c] && m[c][b]))
                    .collect()
            })
            .collect();
    }
    None
}

/// Smallest allowed transition probability over a range of indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionBound {
    pub delta: f64,
    /// `(n, a, b)` attaining `delta`.
    pub at: (i64, usize, usize),
    /// The minimum over the second half of the range is strictly below the
    /// minimum over the first half: the bound is still falling and the
    /// infimum over all of `Z` may be 0.
    pub decaying: bool,
}

/// `min { P_n(a, b) : lo <= n <= hi, M(a, b) = 1 }`.
pub fn transition_bound(spec: &MarkovSpec, lo: i64, hi: i64) -> Result<TransitionBound> {
    if hi < lo {
        return Err(Error::param("window", format!("empty range [{lo}, {hi}]")));
    }
    let s = spec.states();
    let row_min = |n: i64| -> Option<(f64, usize, usize)> {
        let mut best: Option<(f64, usize, usize)> = None;
        for a in 0..s {
            for b in 0..s {
                if spec.structure[a][b] {
                    let v = spec.transition(n, a as Symbol, b as Symbol);
                    if best.is_none_or(|(m, _, _)| v < m) {
                        best = Some((v, a, b));
                    }
                }
            }
        }
        best
    };
    let mid = lo + (hi - lo) / 2;
    let mut first = f64::INFINITY;
    let mut second = f64::INFINITY;
    let mut best = TransitionBound {
        delta: f64::INFINITY,
        at: (lo, 0, 0),
        decaying: false,
    };
    for n in lo..=hi {
        let Some((v, a, b)) = row_min(n) else {
            continue;
        };
        if n <= mid {
            first = first.min(v);
        } else {
            second = second.min(v);
        }
        if v < best.delta {
            best.delta = v;
            best.at = (n, a, b);
        }
    }
    best.decaying = hi > lo && second < first;
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cocycles::{tail_cocycle, PatternPoint, TailPair};
    use crate::measures::{Alphabet, ProbVector};
    use crate::group::GroupElem;

    /// Uniform stationary left tail, `P_0 = [[0.9, 0.1], [0.2, 0.8]]`, and a
    /// different matrix from index 1 on.
    fn two_state() -> MarkovSpec {
        MarkovConfig {
            structure: vec![vec![1, 1], vec![1, 1]],
            left: vec![vec![0.5, 0.5], vec![0.5, 0.5]],
            left_pi: None,
            start: 0,
            window: vec![vec![vec![0.9, 0.1], vec![0.2, 0.8]]],
            right: Some(vec![vec![0.6, 0.4], vec![0.3, 0.7]]),
            marginals: None,
            offset: 0,
        }
        .try_into()
        .unwrap()
    }

    #[test]
    fn cylinder_examples() {
        let m = two_state();
        let c = PathCylinder::new(0, vec![0, 1]).unwrap();
        assert!((markov_measure(&m, &c).unwrap() - 0.05).abs() < 1e-15);
        let single = PathCylinder::new(3, vec![1]).unwrap();
        assert_eq!(markov_measure(&m, &single).unwrap(), m.marginal(3)[1]);
    }

    #[test]
    fn inadmissible_paths_are_rejected() {
        let m = MarkovSpec::stationary(vec![vec![0.5, 0.5], vec![1.0, 0.0]]).unwrap();
        let c = PathCylinder::new(4, vec![0, 1, 1]).unwrap();
        assert_eq!(
            markov_measure(&m, &c),
            Err(Error::Inadmissible {
                index: 5,
                from: 1,
                to: 1
            })
        );
    }

    #[test]
    fn stationary_solve_golden_mean() {
        let m = MarkovSpec::stationary(vec![vec![0.5, 0.5], vec![1.0, 0.0]]).unwrap();
        let pi = m.marginal(-10);
        assert!((pi[0] - 2.0 / 3.0).abs() < 1e-14 && (pi[1] - 1.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn inconsistent_marginals_name_the_index() {
        let c = MarkovConfig {
            structure: vec![vec![1, 1], vec![1, 1]],
            left: vec![vec![0.5, 0.5], vec![0.5, 0.5]],
            left_pi: None,
            start: 2,
            window: vec![vec![vec![0.5, 0.5], vec![0.5, 0.5]], vec![vec![0.9, 0.1], vec![0.2, 0.8]]],
            right: None,
            marginals: Some(vec![vec![0.5, 0.5], vec![0.5, 0.5], vec![0.5, 0.5]]),
            offset: 0,
        };
        match MarkovSpec::try_from(c) {
            Err(Error::InvalidMarkov { index, .. }) => assert_eq!(index, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn structure_must_match_support() {
        let c = MarkovConfig {
            structure: vec![vec![1, 0], vec![1, 1]],
            left: vec![vec![0.5, 0.5], vec![0.5, 0.5]],
            left_pi: None,
            start: 0,
            window: vec![],
            right: None,
            marginals: None,
            offset: 0,
        };
        assert!(matches!(
            MarkovSpec::try_from(c),
            Err(Error::InvalidMarkov { index: -1, .. })
        ));
    }

    #[test]
    fn marginals_propagate_right() {
        let m = two_state();
        for n in -3..20 {
            let lhs = m.transition_matrix(n);
            let pi = m.marginal(n);
            let next: Vec<f64> = (0..2).map(|b| pi[0] * lhs[0][b] + pi[1] * lhs[1][b]).collect();
            assert!(max_gap(&next, &m.marginal(n + 1)) < 1e-14, "{n}");
        }
        // squaring and stepping agree
        let far = m.marginal(10_000);
        let stat = stationary_distribution(&m.transition_matrix(5)).unwrap();
        assert!(max_gap(&far, &stat) < 1e-12);
    }

    #[test]
    fn cocycle_two_factor_ratio() {
        let m = two_state();
        let p = MarkovPair::new(0, vec![0, 0, 1], vec![0, 1, 1]).unwrap();
        let v = markov_tail_cocycle(&m, &p).unwrap();
        let want = (0.1 * 0.7) / (0.9 * 0.4);
        assert!((v.value() - want).abs() < 1e-14);
        assert_eq!(p.differing(), 1);
        let d = markov_tail_cocycle(&m, &MarkovPair::diagonal(0, vec![0, 1, 0]).unwrap()).unwrap();
        assert_eq!(d.value(), 1.0);
    }

    #[test]
    fn shifted_cocycle_is_translated_pair() {
        let m = two_state();
        let p = MarkovPair::new(-2, vec![1, 0, 0, 1], vec![1, 1, 0, 1]).unwrap();
        for n in -4..4 {
            let a = markov_shifted_cocycle(&m, &p, n).unwrap().log_value;
            let b = markov_tail_cocycle(&m, &p.translate(n)).unwrap().log_value;
            assert!((a - b).abs() < 1e-13, "{n}");
        }
    }

    #[test]
    fn primitivity_examples() {
        let t = true;
        let f = false;
        assert_eq!(primitivity(&[vec![t, t], vec![t, t]]), Some(1));
        assert_eq!(primitivity(&[vec![t, f], vec![f, t]]), None);
        assert_eq!(primitivity(&[vec![f, t], vec![t, f]]), None);
        assert_eq!(primitivity(&[vec![t, t], vec![t, f]]), Some(2));
        // Wielandt matrix attains the bound (s-1)^2 + 1
        let w = vec![vec![f, t, f], vec![f, f, t], vec![t, t, f]];
        assert_eq!(primitivity(&w), Some(5));
    }

    #[test]
    fn transition_bound_examples() {
        let u = MarkovSpec::stationary(vec![vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        let b = transition_bound(&u, -5, 5).unwrap();
        assert_eq!(b.delta, 0.5);
        assert!(!b.decaying);

        let m = MarkovSpec::stationary(vec![vec![0.9, 0.1], vec![0.2, 0.8]]).unwrap();
        let b = transition_bound(&m, 0, 10).unwrap();
        assert_eq!((b.delta, b.at.1, b.at.2), (0.1, 0, 1));

        let window = (0..100)
            .map(|n| {
                let p = 1.0 / (n as f64 + 2.0);
                vec![vec![1.0 - p, p], vec![0.5, 0.5]]
            })
            .collect();
        let d = MarkovSpec::try_from(MarkovConfig {
            structure: vec![vec![1, 1], vec![1, 1]],
            left: vec![vec![0.5, 0.5], vec![0.5, 0.5]],
            left_pi: None,
            start: 0,
            window,
            right: None,
            marginals: None,
            offset: 0,
        })
        .unwrap();
        let b = transition_bound(&d, 0, 99).unwrap();
        assert_eq!(b.delta, 1.0 / 101.0);
        assert_eq!(b.at, (99, 0, 1));
        assert!(b.decaying);
    }

    #[test]
    fn product_reduction_matches_tail_cocycle() {
        let fam = MeasureFamily::table_z(
            -2,
            vec![
                ProbVector::new([0.2, 0.3, 0.5]).unwrap(),
                ProbVector::new([0.6, 0.1, 0.3]).unwrap(),
                ProbVector::new([0.25, 0.25, 0.5]).unwrap(),
                ProbVector::new([0.1, 0.8, 0.1]).unwrap(),
            ],
            ProbVector::uniform(3).unwrap(),
        )
        .unwrap();
        let m = MarkovSpec::from_product_family(&fam, -4, 4).unwrap();
        let c = PathCylinder::new(-3, vec![2, 0, 1, 1, 2]).unwrap();
        let want: f64 = c
            .symbols
            .iter()
            .enumerate()
            .map(|(i, &a)| fam.prob_z(c.start + i as i64, a))
            .product();
        assert!((markov_measure(&m, &c).unwrap() - want).abs() < 1e-15);

        let x = vec![0, 1, 2, 0, 1];
        let y = vec![0, 2, 2, 1, 1];
        let pair = MarkovPair::new(-3, x.clone(), y.clone()).unwrap();
        let base = PatternPoint::from_z(Alphabet::new(3).unwrap(), -3, &x, 0).unwrap();
        let diff = (0..5)
            .filter(|&i| x[i] != y[i])
            .map(|i| (GroupElem::scalar(-3 + i as i64), y[i]))
            .collect();
        let tp = TailPair::new(base, diff).unwrap();
        let a = markov_tail_cocycle(&m, &pair).unwrap().log_value;
        let b = tail_cocycle(&fam, &tp).unwrap().log_value;
        assert!((a - b).abs() < 1e-13);
    }

    #[test]
    fn config_round_trip() {
        let m = two_state().translated(3);
        let c: MarkovConfig = m.clone().into();
        let back = MarkovSpec::try_from(c).unwrap();
        assert_eq!(back, m);
    }
}
