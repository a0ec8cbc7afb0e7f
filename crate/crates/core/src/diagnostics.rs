//! Finite-run validators for the convergence/divergence criteria of
//! nonsingular Bernoulli shifts.
//!
//! A series is summed at an increasing list of windows and judged on its
//! increments. Divergence cannot be proven by a finite computation, so the
//! verdict is three-valued and every report carries the thresholds it was
//! judged with.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cocycles::TailPair;
use crate::error::{Error, Result};
use crate::group::GroupElem;
use crate::measures::{
    kakutani_series, non_atomicity_series, range_sum, sq_diff_series, window_sum, BlockFamily,
    Example33, Factor, MeasureFamily, Symbol,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Diverging,
    Converging,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Diverging => "diverging",
            Verdict::Converging => "converging",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    /// Diverging when the last increment is at least this fraction of the
    /// first nonzero window sum.
    pub diverge_fraction: f64,
    /// Converging when the last increment is below this.
    pub converge_increment: f64,
    /// Converging when the last two increments shrink at least by this
    /// factor (geometric decay of the doubling increments).
    pub converge_ratio: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            diverge_fraction: 0.5,
            converge_increment: 1e-10,
            converge_ratio: 0.75,
        }
    }
}

/// Window sizes at which a series is summed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Schedule {
    /// `1, 2, 4, ...` up to `max` (included).
    Doubling { max: u64 },
    Explicit { windows: Vec<u64> },
}

impl Schedule {
    pub fn windows(&self) -> Result<Vec<u64>> {
        let w = match self {
            Schedule::Doubling { max } => {
                let mut w = Vec::new();
                let mut r = 1u64;
                while r < *max {
                    w.push(r);
                    r = r.saturating_mul(2);
                }
                w.push((*max).max(1));
                w
            }
            Schedule::Explicit { windows } => windows.clone(),
        };
        if w.is_empty() || w.windows(2).any(|p| p[0] >= p[1]) {
            return Err(Error::param("windows", "need a nonempty strictly increasing list"));
        }
        Ok(w)
    }

    /// Windows ending at the blocks of levels `1, 2, 4, 8, ...`: the
    /// natural scale for series that grow like `log l` in the level `l`.
    pub fn levels(b: &BlockFamily) -> Self {
        let a = b.a_seq();
        let mut windows = Vec::new();
        let mut l = 1;
        while l < a.len() {
            windows.push((2 * a[l] - 1) as u64);
            l *= 2;
        }
        Schedule::Explicit { windows }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesReport {
    pub windows: Vec<u64>,
    pub partial_sums: Vec<f64>,
    /// `|S_i - S_{i-1}|` for consecutive windows.
    pub increments: Vec<f64>,
    pub verdict: Verdict,
    pub thresholds: Thresholds,
}

impl SeriesReport {
    pub fn from_sums(windows: Vec<u64>, partial_sums: Vec<f64>, thresholds: Thresholds) -> Self {
        let increments: Vec<f64> = partial_sums.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
        let verdict = classify(&partial_sums, &increments, &thresholds);
        SeriesReport {
            windows,
            partial_sums,
            increments,
            verdict,
            thresholds,
        }
    }

    pub fn last(&self) -> f64 {
        *self.partial_sums.last().unwrap()
    }
}

fn classify(sums: &[f64], incs: &[f64], t: &Thresholds) -> Verdict {
    let Some(&last) = incs.last() else {
        return Verdict::Inconclusive;
    };
    if sums.iter().any(|s| !s.is_finite()) {
        return Verdict::Inconclusive;
    }
    let reference = std::iter::once(sums[0].abs())
        .chain(incs.iter().copied())
        .find(|&v| v > 0.0);
    let Some(reference) = reference else {
        return Verdict::Converging;
    };
    if last < t.converge_increment {
        return Verdict::Converging;
    }
    if last >= t.diverge_fraction * reference {
        return Verdict::Diverging;
    }
    if incs.len() >= 2 {
        let prev = incs[incs.len() - 2];
        if prev > 0.0 && last / prev <= t.converge_ratio {
            return Verdict::Converging;
        }
    }
    Verdict::Inconclusive
}

fn report_over(
    schedule: &Schedule,
    thresholds: Thresholds,
    sum: impl Fn(u64) -> Result<f64> + Sync,
) -> Result<SeriesReport> {
    let windows = schedule.windows()?;
    let sums = windows.iter().map(|&n| sum(n)).collect::<Result<Vec<_>>>()?;
    Ok(SeriesReport::from_sums(windows, sums, thresholds))
}

/// `sum_{|n| <= N} log max_a mu_n(a)`; divergence to `-inf` means the
/// product measure is non-atomic.
pub fn non_atomicity_report(
    fam: &MeasureFamily,
    schedule: &Schedule,
    thresholds: Thresholds,
) -> Result<SeriesReport> {
    report_over(schedule, thresholds, |n| non_atomicity_series(fam, n))
}

/// Kakutani series for the shift by `g`; convergence means `T_g` is
/// nonsingular.
pub fn kakutani_report(
    fam: &MeasureFamily,
    g: &GroupElem,
    schedule: &Schedule,
    thresholds: Thresholds,
) -> Result<SeriesReport> {
    report_over(schedule, thresholds, |n| kakutani_series(fam, g, n))
}

/// Which shifts `n` enter the conservativity series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ShiftSelection {
    /// All `|n| <= N`, partial sums at the schedule's windows.
    Window { schedule: Schedule },
    /// Only the listed shifts; partial sums over the first `1, 2, 4, ...`.
    Points { shifts: Vec<i64> },
}

/// Bound on the part of `sum_j |mu_{j+n}(0) - mu_j(0)|^2` outside `|j| <= J`.
#[derive(Debug, Clone, Copy)]
pub enum InnerTail<'a> {
    /// From the family's segments: exact (zero) once the window covers every
    /// breakpoint; otherwise unavailable.
    Segments,
    /// From the level structure of the example family, including the levels
    /// beyond the index range.
    Example33(&'a Example33),
    /// A caller-supplied bound valid for every tested shift.
    Bound(f64),
}

/// Inner sums at or above this are not certified.
pub const INNER_TAIL_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConservativityTerm {
    pub n: i64,
    pub inner_sum: f64,
    pub tail_bound: f64,
    pub term: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConservativityReport {
    pub xi: f64,
    pub j_window: u64,
    pub terms: Vec<ConservativityTerm>,
    pub series: SeriesReport,
    pub max_tail_bound: f64,
}

fn segment_tail(fam: &MeasureFamily, n: i64, j_window: u64) -> f64 {
    let Some(seg) = fam.segments() else {
        return f64::INFINITY;
    };
    let reach = seg
        .starts()
        .iter()
        .skip(1)
        .map(|s| s.unsigned_abs())
        .max()
        .unwrap_or(0);
    if (j_window as u128) >= reach + n.unsigned_abs() as u128 {
        0.0
    } else {
        f64::INFINITY
    }
}

/// Levels whose blocks are not inside `|j| <= J - |n|` contribute at most
/// `4 |n| alpha_l^2` each (four block edges, `|n|` sites per edge) as long as
/// `|n| <= A_l`.
fn example33_tail(ex: &Example33, n: i64, j_window: u64) -> f64 {
    let m = n.unsigned_abs() as f64;
    let mut tail = 0.0;
    for l in 1..=ex.levels() {
        if 2.0 * ex.a(l) + m > j_window as f64 {
            if m > ex.a(l) && ex.alpha(l) > 0.0 {
                return f64::INFINITY;
            }
            tail += 4.0 * m * ex.alpha(l).powi(2);
        }
    }
    tail
}

/// `sum_n exp(-xi sum_{|j| <= J} |mu_{j+n}(0) - mu_j(0)|^2)`, whose
/// divergence is the conservativity criterion for binary families.
pub fn conservativity_series(
    fam: &MeasureFamily,
    xi: f64,
    shifts: &ShiftSelection,
    j_window: u64,
    tail: InnerTail<'_>,
    thresholds: Thresholds,
) -> Result<ConservativityReport> {
    if fam.k() != 2 {
        return Err(Error::NotBinary(fam.k()));
    }
    if !(xi > 0.0) {
        return Err(Error::param("xi", "must be positive"));
    }
    let ns: Vec<i64> = match shifts {
        ShiftSelection::Window { schedule } => {
            let max = *schedule.windows()?.last().unwrap() as i64;
            (-max..=max).collect()
        }
        ShiftSelection::Points { shifts } => shifts.clone(),
    };
    let terms = ns
        .par_iter()
        .map(|&n| {
            let inner = sq_diff_series(fam, n, j_window)?;
            let tail_bound = match tail {
                InnerTail::Segments => segment_tail(fam, n, j_window),
                InnerTail::Example33(ex) => example33_tail(ex, n, j_window),
                InnerTail::Bound(b) => b,
            };
            Ok(ConservativityTerm {
                n,
                inner_sum: inner,
                tail_bound,
                term: (-xi * inner).exp(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let max_tail_bound = terms.iter().map(|t| t.tail_bound).fold(0.0, f64::max);
    let mut series = match shifts {
        ShiftSelection::Window { schedule } => {
            let windows = schedule.windows()?;
            let sums = windows
                .iter()
                .map(|&w| {
                    terms
                        .iter()
                        .filter(|t| t.n.unsigned_abs() <= w)
                        .map(|t| t.term)
                        .sum()
                })
                .collect();
            SeriesReport::from_sums(windows, sums, thresholds)
        }
        ShiftSelection::Points { .. } => {
            let windows = Schedule::Doubling {
                max: terms.len() as u64,
            }
            .windows()?;
            let sums = windows
                .iter()
                .map(|&w| terms[..w as usize].iter().map(|t| t.term).sum())
                .collect();
            SeriesReport::from_sums(windows, sums, thresholds)
        }
    };
    if !(max_tail_bound < INNER_TAIL_TOLERANCE) {
        series.verdict = Verdict::Inconclusive;
    }
    Ok(ConservativityReport {
        xi,
        j_window,
        terms,
        series,
        max_tail_bound,
    })
}

/// The shifts `4 A_l`, `l` in `levels`, at which the example's inner sums
/// behave like `log(l) / xi`.
pub fn example33_block_shifts(ex: &Example33, levels: std::ops::RangeInclusive<usize>) -> Vec<i64> {
    levels
        .filter(|&l| l >= 1 && l <= ex.family_levels() && 4 * ex.a_index(l) > 0)
        .map(|l| 4 * ex.a_index(l))
        .collect()
}

/// `sum_{|n| <= N} min(mu_n(B), mu_n(A \ B))`; divergence is the ergodicity
/// criterion for the symmetric relation.
pub fn symmetric_ergodicity(
    fam: &MeasureFamily,
    b: &[Symbol],
    schedule: &Schedule,
    thresholds: Thresholds,
) -> Result<SeriesReport> {
    let k = fam.k();
    let mut inb = vec![false; k];
    for &a in b {
        fam.alphabet().check(a)?;
        inb[a as usize] = true;
    }
    let count = inb.iter().filter(|&&x| x).count();
    if count == 0 || count == k {
        return Err(Error::param("B", "must be a proper nonempty subset of the alphabet"));
    }
    let term = |p: &[f64]| {
        let mass: f64 = p.iter().zip(&inb).filter(|(_, &i)| i).map(|(x, _)| x).sum();
        let rest: f64 = p.iter().zip(&inb).filter(|(_, &i)| !i).map(|(x, _)| x).sum();
        mass.min(rest)
    };
    report_over(schedule, thresholds, |n| window_sum(fam, n, term))
}

/// Weights `eps_h = scale * base^{-|h|_1}` of the metric
/// `d(x, y) = sum_h eps_h [x_h != y_h]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UltrametricSpec {
    pub scale: f64,
    pub base: f64,
}

impl UltrametricSpec {
    pub fn new(scale: f64, base: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::param("scale", "must be positive"));
        }
        if !(base > 1.0 && base.is_finite()) {
            return Err(Error::param("base", "must exceed 1 for summable weights"));
        }
        Ok(UltrametricSpec { scale, base })
    }

    /// Weights with total mass 1 on `Z^dim`.
    pub fn normalized(dim: usize, base: f64) -> Result<Self> {
        let per_axis = (base - 1.0) / (base + 1.0);
        UltrametricSpec::new(per_axis.powi(dim as i32), base)
    }

    pub fn weight(&self, h: &GroupElem) -> f64 {
        let l1: f64 = h.coords().iter().map(|c| c.unsigned_abs() as f64).sum();
        self.scale * (-l1 * self.base.ln()).exp()
    }

    /// `sum_{h in Z^dim} eps_h` in closed form.
    pub fn total_mass(&self, dim: usize) -> f64 {
        self.scale * ((self.base + 1.0) / (self.base - 1.0)).powi(dim as i32)
    }
}

impl Default for UltrametricSpec {
    fn default() -> Self {
        UltrametricSpec {
            scale: 0.25,
            base: 2.0,
        }
    }
}

/// `d(T_g x, T_g y) = sum_{h in F + g} eps_h`.
pub fn squash_distance(pair: &TailPair, g: &GroupElem, metric: &UltrametricSpec) -> Result<f64> {
    if g.dim() != pair.dim() {
        return Err(Error::DimensionMismatch {
            left: pair.dim(),
            right: g.dim(),
        });
    }
    Ok(pair
        .support()
        .map(|h| metric.weight(&h.add_unchecked(g)))
        .sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DRegularity {
    /// `max_{k, a} max(mu_k(a)/mu_{k+1}(a), mu_{k+1}(a)/mu_k(a))`.
    pub estimate: f64,
    pub attained_at: i64,
    pub declared: Option<f64>,
    /// `estimate < declared`.
    pub pass: Option<bool>,
}

/// The one-step ratio bound over `k_lo <= k <= k_hi`, `k_hi < 0`.
pub fn d_regularity(
    fam: &MeasureFamily,
    k_lo: i64,
    k_hi: i64,
    declared: Option<f64>,
) -> Result<DRegularity> {
    if fam.dim() != 1 {
        return Err(Error::NotOneDimensional);
    }
    if k_hi >= 0 || k_lo > k_hi {
        return Err(Error::param("k_range", "need k_lo <= k_hi < 0"));
    }
    let ratio = |p: &[f64], q: &[f64]| {
        p.iter()
            .zip(q)
            .map(|(a, b)| (a / b).max(b / a))
            .fold(1.0, f64::max)
    };
    let mut best = (1.0, k_hi);
    match crate::measures::pair_pieces(fam, 1, k_lo, k_hi, |_, _| 0.0) {
        Some(_) => {
            let seg = fam.segments().unwrap();
            for (lo, _, p, q) in seg.pair_pieces(1, k_lo as i128, k_hi as i128) {
                let r = ratio(p, q);
                if r > best.0 {
                    best = (r, lo as i64);
                }
            }
        }
        None => {
            if (k_hi as i128 - k_lo as i128) > 50_000_000 {
                return Err(Error::param("k_range", "too long for a family without segments"));
            }
            for k in k_lo..=k_hi {
                let r = ratio(&fam.factor_z(k), &fam.factor_z(k + 1));
                if r > best.0 {
                    best = (r, k);
                }
            }
        }
    }
    Ok(DRegularity {
        estimate: best.0,
        attained_at: best.1,
        declared,
        pass: declared.map(|d| best.0 < d),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailProbe {
    /// Start of the final constant run on this side, when that run covers
    /// at least half of the side of the window and starts at the same index
    /// seen from the last two schedule windows.
    pub onset: Option<i64>,
    /// The constant-tail candidate factor.
    pub candidate: Vec<f64>,
    /// Kakutani series between the family and the family with this tail
    /// replaced by the candidate.
    pub kakutani: SeriesReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemistationarityReport {
    pub window: u64,
    pub right: TailProbe,
    pub left: TailProbe,
    /// Eventually constant in some direction within the window.
    pub semistationary: bool,
    /// Some tail candidate gives a converging Kakutani series.
    pub equivalent_candidate: bool,
}

/// Finite-window estimate of the Cesàro limit of the factors on `[lo, hi]`:
/// the factor holding the most indices (segments), else the mean over the
/// half of the range away from the origin. The mode is exact for families
/// that are eventually constant, and for level-block families whose
/// background factor fills most of the window.
fn cesaro_candidate(fam: &MeasureFamily, lo: i64, hi: i64, positive: bool) -> Result<Factor> {
    if let Some(seg) = fam.segments() {
        let mut best: Option<(i128, Factor)> = None;
        let mut tally: Vec<(Factor, i128)> = Vec::new();
        for (a, b, p, _) in seg.pair_pieces(0, lo as i128, hi as i128) {
            match tally.iter_mut().find(|(f, _)| f == p) {
                Some(e) => e.1 += b - a + 1,
                None => tally.push((p.clone(), b - a + 1)),
            }
        }
        for (f, c) in tally {
            if best.as_ref().is_none_or(|(bc, _)| c > *bc) {
                best = Some((c, f));
            }
        }
        return Ok(best.unwrap().1);
    }
    let (a, b) = if positive {
        (lo + (hi - lo) / 2, hi)
    } else {
        (lo, lo + (hi - lo) / 2)
    };
    let len = (b - a + 1) as f64;
    let mut acc = vec![0.0; fam.k()];
    for (i, slot) in acc.iter_mut().enumerate() {
        *slot = range_sum(fam, a, b, |p| p[i])? / len;
    }
    Ok(acc.into_iter().collect())
}

/// Start of the constant run containing `edge`, clipped at the origin.
fn final_run_onset(fam: &MeasureFamily, edge: i64, positive: bool) -> i64 {
    match fam.segments() {
        Some(seg) => {
            let i = seg.index_of(edge as i128);
            if positive {
                (seg.starts()[i].max(0) as i64).min(edge)
            } else {
                let end = seg.starts().get(i + 1).map(|s| s - 1).unwrap_or(i64::MAX as i128);
                end.min(0) as i64
            }
        }
        None => {
            let edge_factor = fam.factor_z(edge);
            let mut k = edge;
            let step = if positive { -1 } else { 1 };
            while k != 0 && fam.factor_z(k + step) == edge_factor {
                k += step;
            }
            k
        }
    }
}

fn tail_probe(
    fam: &MeasureFamily,
    n: i64,
    positive: bool,
    schedule: &Schedule,
    thresholds: Thresholds,
) -> Result<TailProbe> {
    let (lo, hi) = if positive { (0, n) } else { (-n, 0) };
    // the final run must start at the same place seen from the last two
    // schedule windows and from the probe window itself
    let mut views: Vec<i64> = schedule
        .windows()?
        .into_iter()
        .map(|w| (w.min(n as u64)) as i64)
        .collect();
    views.dedup();
    let mut views: Vec<i64> = views.into_iter().rev().take(2).collect();
    views.push(n);
    let onsets = views
        .iter()
        .map(|&w| final_run_onset(fam, if positive { w } else { -w }, positive))
        .collect::<Vec<_>>();
    let onset = onsets[onsets.len() - 1];
    let onset = (onsets.iter().all(|&o| o == onset) && onset.unsigned_abs() <= (n as u64) / 2)
        .then_some(onset);
    let candidate = cesaro_candidate(fam, lo, hi, positive)?;
    let hellinger = |p: &[f64]| {
        p.iter()
            .zip(&candidate)
            .map(|(a, b)| (a.sqrt() - b.sqrt()).powi(2))
            .sum::<f64>()
    };
    let kakutani = report_over(schedule, thresholds, |w| {
        let w = (w as i64).min(n);
        if positive {
            range_sum(fam, 0, w, hellinger)
        } else {
            range_sum(fam, -w, 0, hellinger)
        }
    })?;
    Ok(TailProbe {
        onset,
        candidate: candidate.to_vec(),
        kakutani,
    })
}

/// Eventual constancy of a one-dimensional family within `|n| <= N`, and
/// the Kakutani comparison with the constant-tail candidates on each side.
pub fn semistationarity_probe(
    fam: &MeasureFamily,
    n: u64,
    schedule: &Schedule,
    thresholds: Thresholds,
) -> Result<SemistationarityReport> {
    if fam.dim() != 1 {
        return Err(Error::NotOneDimensional);
    }
    let n = n.clamp(1, i64::MAX as u64) as i64;
    let right = tail_probe(fam, n, true, schedule, thresholds)?;
    let left = tail_probe(fam, n, false, schedule, thresholds)?;
    let semistationary = right.onset.is_some() || left.onset.is_some();
    let equivalent_candidate = right.kakutani.verdict == Verdict::Converging
        || left.kakutani.verdict == Verdict::Converging;
    Ok(SemistationarityReport {
        window: n as u64,
        right,
        left,
        semistationary,
        equivalent_candidate,
    })
}
