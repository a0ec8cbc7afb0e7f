//! Product measures on `A^G`: alphabets, probability vectors and indexed
//! families `(mu_g)`, evaluated lazily from rules.
//!
//! One-dimensional families that are piecewise constant in the index expose
//! a [`Segments`] decomposition; every series over Z is then summed piece by
//! piece, which keeps windows reaching `|n| ~ 10^18` exact and cheap.

mod example33;
mod series;
mod spec;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::{Error, Result};
use crate::group::{GroupElem, Window};

pub use example33::{BlockFamily, Example33, Example33Params};
pub use series::{
    kakutani_series, non_atomicity_series, pair_pieces, range_sum, sq_diff_series, window_sum, Piece,
};
pub use spec::{FamilySpec, TableEntry};

pub type Symbol = u8;

/// Entries of one factor `mu_h`; inline for alphabets up to four symbols.
pub type Factor = SmallVec<[f64; 4]>;

pub const PROB_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Alphabet(usize);

impl Alphabet {
    pub fn new(k: usize) -> Result<Self> {
        if !(2..=256).contains(&k) {
            return Err(Error::AlphabetSize(k));
        }
        Ok(Alphabet(k))
    }

    pub fn binary() -> Self {
        Alphabet(2)
    }

    pub fn size(self) -> usize {
        self.0
    }

    pub fn symbols(self) -> impl Iterator<Item = Symbol> {
        (0..self.0).map(|a| a as Symbol)
    }

    pub fn check(self, a: Symbol) -> Result<()> {
        if (a as usize) < self.0 {
            Ok(())
        } else {
            Err(Error::SymbolOutOfRange {
                symbol: a as usize,
                size: self.0,
            })
        }
    }
}

/// Strictly positive probability vector on a finite alphabet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ProbVector(Factor);

impl ProbVector {
    pub fn new(p: impl IntoIterator<Item = f64>) -> Result<Self> {
        let p: Factor = p.into_iter().collect();
        Alphabet::new(p.len())?;
        if p.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidProbVector(format!("non-finite entry in {p:?}")));
        }
        if p.iter().any(|&x| x <= 0.0) {
            return Err(Error::InvalidProbVector(format!(
                "degenerate vector {p:?}: every entry must be positive"
            )));
        }
        let s: f64 = p.iter().sum();
        if (s - 1.0).abs() > PROB_TOL {
            return Err(Error::InvalidProbVector(format!("entries sum to {s}, not 1")));
        }
        Ok(ProbVector(p))
    }

    /// `(p0, 1 - p0)`.
    pub fn binary(p0: f64) -> Result<Self> {
        ProbVector::new([p0, 1.0 - p0])
    }

    pub fn uniform(k: usize) -> Result<Self> {
        ProbVector::new(std::iter::repeat(1.0 / k as f64).take(k))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn get(&self, a: Symbol) -> f64 {
        self.0[a as usize]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(0.0, f64::max)
    }
}

impl TryFrom<Vec<f64>> for ProbVector {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        ProbVector::new(v)
    }
}

impl From<ProbVector> for Vec<f64> {
    fn from(p: ProbVector) -> Self {
        p.0.into_vec()
    }
}

type BinaryFn = dyn Fn(i64) -> f64 + Send + Sync;

/// A binary family given by `n -> mu_n(0)`. `constant_outside = (a, b)`
/// certifies that `mu_n = mu_{a-1}` for `n < a` and `mu_n = mu_{b+1}` for
/// `n > b`; without it no truncation certificate exists.
#[derive(Clone)]
pub struct BinaryRule {
    p0: Arc<BinaryFn>,
    constant_outside: Option<(i64, i64)>,
}

#[derive(Clone)]
pub(crate) enum Rule {
    Stationary(ProbVector),
    Table {
        entries: BTreeMap<GroupElem, ProbVector>,
        default: ProbVector,
    },
    Blocks(BlockFamily),
    Binary(BinaryRule),
}

/// The indexed family `(mu_g)`, evaluated on demand.
///
/// `factor(h)` is `rule(sym(h + offset))` where `sym` takes coordinatewise
/// absolute values when the family is symmetric. The offset is how
/// [`MeasureFamily::translated`] re-indexes without copying the rule.
#[derive(Clone)]
pub struct MeasureFamily {
    alphabet: Alphabet,
    dim: usize,
    rule: Arc<Rule>,
    symmetric: bool,
    offset: GroupElem,
    declared_bound: Option<f64>,
}

impl fmt::Debug for MeasureFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &*self.rule {
            Rule::Stationary(p) => format!("stationary {:?}", p.as_slice()),
            Rule::Table { entries, .. } => format!("table ({} entries)", entries.len()),
            Rule::Blocks(b) => format!("blocks (lambda={}, {} levels)", b.lambda(), b.levels()),
            Rule::Binary(_) => "binary closure".to_string(),
        };
        f.debug_struct("MeasureFamily")
            .field("alphabet", &self.alphabet.size())
            .field("dim", &self.dim)
            .field("rule", &kind)
            .field("symmetric", &self.symmetric)
            .field("offset", &self.offset)
            .finish()
    }
}

impl MeasureFamily {
    fn from_rule(alphabet: Alphabet, dim: usize, rule: Rule) -> Self {
        MeasureFamily {
            alphabet,
            dim,
            rule: Arc::new(rule),
            symmetric: false,
            offset: GroupElem::zero(dim),
            declared_bound: None,
        }
    }

    /// `mu_g = p` for every `g`.
    pub fn stationary(p: ProbVector, dim: usize) -> Self {
        let alphabet = Alphabet(p.len());
        MeasureFamily::from_rule(alphabet, dim.max(1), Rule::Stationary(p))
    }

    /// Explicit factors on finitely many indices, `default` everywhere else.
    pub fn table(
        dim: usize,
        entries: BTreeMap<GroupElem, ProbVector>,
        default: ProbVector,
    ) -> Result<Self> {
        let k = default.len();
        for (g, p) in &entries {
            if g.dim() != dim {
                return Err(Error::DimensionMismatch {
                    left: dim,
                    right: g.dim(),
                });
            }
            if p.len() != k {
                return Err(Error::InvalidProbVector(format!(
                    "entry at {g} has {} symbols, default has {k}",
                    p.len()
                )));
            }
        }
        Ok(MeasureFamily::from_rule(
            Alphabet(k),
            dim,
            Rule::Table { entries, default },
        ))
    }

    /// One-dimensional table with factors `mu_{start}, mu_{start+1}, ...`.
    pub fn table_z(start: i64, factors: Vec<ProbVector>, default: ProbVector) -> Result<Self> {
        let entries = factors
            .into_iter()
            .enumerate()
            .map(|(i, p)| (GroupElem::scalar(start + i as i64), p))
            .collect();
        MeasureFamily::table(1, entries, default)
    }

    pub fn blocks(b: BlockFamily) -> Self {
        let mut fam = MeasureFamily::from_rule(Alphabet::binary(), 1, Rule::Blocks(b));
        fam.symmetric = true;
        fam
    }

    /// Binary family `mu_n(0) = p0(n)`; values are checked on evaluation.
    pub fn binary_fn(
        p0: impl Fn(i64) -> f64 + Send + Sync + 'static,
        constant_outside: Option<(i64, i64)>,
    ) -> Result<Self> {
        if let Some((a, b)) = constant_outside {
            if a > b {
                return Err(Error::param("constant_outside", "need a <= b"));
            }
        }
        Ok(MeasureFamily::from_rule(
            Alphabet::binary(),
            1,
            Rule::Binary(BinaryRule {
                p0: Arc::new(p0),
                constant_outside,
            }),
        ))
    }

    /// Index the family by `|g|` (coordinatewise).
    pub fn with_symmetric(mut self, symmetric: bool) -> Self {
        self.symmetric = symmetric;
        self
    }

    /// Declare a uniform lower bound `delta <= min_a mu_g(a)`. Checked
    /// against the certified bound when the rule provides one.
    pub fn with_lower_bound(mut self, delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta <= 1.0 / self.alphabet.size() as f64) {
            return Err(Error::param("delta", format!("{delta} is not in (0, 1/k]")));
        }
        if let Some(b) = self.certified_bound() {
            if delta > b {
                return Err(Error::param(
                    "delta",
                    format!("declared bound {delta} exceeds the family minimum {b}"),
                ));
            }
        }
        self.declared_bound = Some(delta);
        Ok(self)
    }

    /// The family `nu_h = mu_{g h}`.
    pub fn translated(&self, g: &GroupElem) -> Result<Self> {
        if g.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                left: self.dim,
                right: g.dim(),
            });
        }
        let mut out = self.clone();
        out.offset = self.offset.add_unchecked(g);
        Ok(out)
    }

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    pub fn k(&self) -> usize {
        self.alphabet.size()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn offset(&self) -> &GroupElem {
        &self.offset
    }

    pub fn is_stationary(&self) -> bool {
        matches!(&*self.rule, Rule::Stationary(_))
    }

    /// Same rule object and indexing, so the two families agree everywhere.
    pub fn same_as(&self, other: &MeasureFamily) -> bool {
        Arc::ptr_eq(&self.rule, &other.rule)
            && self.symmetric == other.symmetric
            && self.offset == other.offset
    }

    pub fn block_family(&self) -> Option<&BlockFamily> {
        match &*self.rule {
            Rule::Blocks(b) => Some(b),
            _ => None,
        }
    }

    fn resolve(&self, h: &GroupElem) -> GroupElem {
        let m = h.add_unchecked(&self.offset);
        if self.symmetric {
            m.abs()
        } else {
            m
        }
    }

    fn resolve_z(&self, n: i64) -> i64 {
        let m = n + self.offset.first();
        if self.symmetric {
            m.abs()
        } else {
            m
        }
    }

    fn rule_factor(&self, m: &GroupElem) -> Factor {
        match &*self.rule {
            Rule::Stationary(p) => p.0.clone(),
            Rule::Table { entries, default } => entries.get(m).unwrap_or(default).0.clone(),
            Rule::Blocks(b) => {
                let p0 = b.p0(m.first());
                smallvec::smallvec![p0, 1.0 - p0]
            }
            Rule::Binary(r) => {
                let p0 = (r.p0)(m.first());
                assert!(
                    p0 > 0.0 && p0 < 1.0,
                    "binary family produced mu({m})(0) = {p0}, outside (0, 1)"
                );
                smallvec::smallvec![p0, 1.0 - p0]
            }
        }
    }

    /// The factor `mu_h`.
    pub fn factor(&self, h: &GroupElem) -> Factor {
        debug_assert_eq!(h.dim(), self.dim);
        self.rule_factor(&self.resolve(h))
    }

    pub fn factor_z(&self, n: i64) -> Factor {
        match &*self.rule {
            Rule::Blocks(b) => {
                let p0 = b.p0(self.resolve_z(n));
                smallvec::smallvec![p0, 1.0 - p0]
            }
            _ => self.factor(&GroupElem::scalar(n)),
        }
    }

    /// `mu_h(a)`.
    pub fn prob(&self, h: &GroupElem, a: Symbol) -> f64 {
        match &*self.rule {
            Rule::Stationary(p) => p.get(a),
            Rule::Table { entries, default } => {
                entries.get(&self.resolve(h)).unwrap_or(default).get(a)
            }
            _ => self.factor(h)[a as usize],
        }
    }

    pub fn prob_z(&self, n: i64, a: Symbol) -> f64 {
        match &*self.rule {
            Rule::Blocks(b) => {
                let p0 = b.p0(self.resolve_z(n));
                if a == 0 {
                    p0
                } else {
                    1.0 - p0
                }
            }
            _ => self.prob(&GroupElem::scalar(n), a),
        }
    }

    /// A lower bound on `min_a mu_g(a)` over all `g` that the rule certifies
    /// in closed form, if it has one.
    pub fn certified_bound(&self) -> Option<f64> {
        match &*self.rule {
            Rule::Stationary(p) => Some(p.min()),
            Rule::Table { entries, default } => Some(
                entries
                    .values()
                    .map(ProbVector::min)
                    .fold(default.min(), f64::min),
            ),
            Rule::Blocks(b) => Some(b.min_factor_entry()),
            Rule::Binary(_) => None,
        }
    }

    /// The uniform bound `delta`: the declared one, else the certified one.
    pub fn lower_bound(&self) -> Option<f64> {
        self.declared_bound.or_else(|| self.certified_bound())
    }

    /// Check every factor in `window` is a valid probability vector, and
    /// respects the declared lower bound.
    pub fn validate_window(&self, window: &Window) -> Result<()> {
        for h in window.iter() {
            let f = self.factor(&h);
            let s: f64 = f.iter().sum();
            if f.iter().any(|&x| !(x > 0.0)) || (s - 1.0).abs() > PROB_TOL {
                return Err(Error::InvalidProbVector(format!("factor at {h}: {f:?}")));
            }
            if let Some(d) = self.declared_bound {
                if f.iter().any(|&x| x < d) {
                    return Err(Error::InvalidProbVector(format!(
                        "factor at {h} violates declared bound {d}: {f:?}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Piecewise-constant decomposition of a one-dimensional family, if the
    /// rule admits one.
    pub fn segments(&self) -> Option<Segments> {
        if self.dim != 1 {
            return None;
        }
        let mut cands: BTreeSet<i128> = BTreeSet::new();
        let mut push_rule_breaks = |b: i64| {
            // rule index m changes value between b-1 and b
            if self.symmetric {
                if b >= 1 {
                    cands.insert(b as i128);
                    cands.insert(-(b as i128) + 1);
                }
            } else {
                cands.insert(b as i128);
            }
        };
        match &*self.rule {
            Rule::Stationary(_) => {}
            Rule::Table { entries, .. } => {
                for g in entries.keys() {
                    let k = g.first();
                    push_rule_breaks(k);
                    push_rule_breaks(k + 1);
                }
            }
            Rule::Blocks(b) => {
                for &a in b.a_seq().iter().skip(1) {
                    push_rule_breaks(a);
                    push_rule_breaks(2 * a);
                }
            }
            Rule::Binary(r) => {
                let (a, b) = r.constant_outside?;
                if (b as i128 - a as i128) > 4_000_000 {
                    return None;
                }
                for m in a..=b + 1 {
                    push_rule_breaks(m);
                }
            }
        }
        // candidates are in rule-index space; convert to family index n = m - offset
        let off = self.offset.first() as i128;
        let mut starts = vec![i64::MIN as i128];
        starts.extend(cands.into_iter().map(|m| m - off));
        let mut out = Segments {
            starts: Vec::with_capacity(starts.len()),
            factors: Vec::with_capacity(starts.len()),
        };
        for s in starts {
            let n = s.clamp(i64::MIN as i128, i64::MAX as i128) as i64;
            let f = if s == i64::MIN as i128 {
                self.far_factor(false)
            } else {
                self.factor_z(n)
            };
            if out.factors.last() != Some(&f) {
                out.starts.push(s);
                out.factors.push(f);
            }
        }
        Some(out)
    }

    /// Factor on the far negative (or positive) end without evaluating at
    /// `i64::MIN`, where `n + offset` could overflow.
    fn far_factor(&self, positive: bool) -> Factor {
        match &*self.rule {
            Rule::Stationary(p) => p.0.clone(),
            Rule::Table { default, .. } => default.0.clone(),
            Rule::Blocks(b) => {
                let p0 = b.p0(i64::MAX);
                smallvec::smallvec![p0, 1.0 - p0]
            }
            Rule::Binary(r) => {
                let (a, b) = r.constant_outside.expect("segments require a certificate");
                let m = if positive || self.symmetric { b + 1 } else { a - 1 };
                let p0 = (r.p0)(m);
                smallvec::smallvec![p0, 1.0 - p0]
            }
        }
    }

    /// A superset of `{h : mu_{g h} != mu_h}`, when it can be certified.
    pub fn discrepancy_support(&self, g: &GroupElem) -> Option<Support> {
        if g.dim() != self.dim {
            return None;
        }
        if g.is_identity() || self.is_stationary() {
            return Some(Support::Points(Vec::new()));
        }
        if let Some(seg) = self.segments() {
            let s = g.first();
            let ranges = seg
                .pair_pieces(s, i64::MIN as i128, i64::MAX as i128)
                .filter(|(_, _, a, b)| a != b)
                .map(|(lo, hi, _, _)| (lo as i64, hi as i64))
                .collect::<Vec<_>>();
            return Some(Support::Ranges(merge_ranges(ranges)));
        }
        match &*self.rule {
            Rule::Table { entries, .. } => {
                let mut cands = BTreeSet::new();
                for key in entries.keys() {
                    for m in self.preimages(key) {
                        let h = m.sub_unchecked(&self.offset);
                        cands.insert(h.sub_unchecked(g));
                        cands.insert(h);
                    }
                }
                let pts = cands
                    .into_iter()
                    .filter(|h| self.factor(&h.add_unchecked(g)) != self.factor(h))
                    .collect();
                Some(Support::Points(pts))
            }
            _ => None,
        }
    }

    /// Rule indices `m` that resolve to `key` under the symmetry map.
    fn preimages(&self, key: &GroupElem) -> Vec<GroupElem> {
        if !self.symmetric {
            return vec![key.clone()];
        }
        if key.coords().iter().any(|&c| c < 0) {
            return Vec::new();
        }
        let mut out = vec![Vec::<i64>::new()];
        for &c in key.coords() {
            let mut next = Vec::new();
            for p in &out {
                let mut a = p.clone();
                a.push(c);
                next.push(a);
                if c != 0 {
                    let mut b = p.clone();
                    b.push(-c);
                    next.push(b);
                }
            }
            out = next;
        }
        out.into_iter().map(GroupElem::new).collect()
    }
}

/// Maximal runs of a one-dimensional family: `factors[i]` holds on
/// `[starts[i], starts[i+1])`, the first run starting at `i64::MIN`.
#[derive(Debug, Clone, PartialEq)]
pub struct Segments {
    starts: Vec<i128>,
    factors: Vec<Factor>,
}

impl Segments {
    pub fn len(&self) -> usize {
        self.starts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.starts.is_empty()
    }

    pub fn starts(&self) -> &[i128] {
        &self.starts
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    /// Index of the run containing `n`; the first run extends to `-inf`.
    pub fn index_of(&self, n: i128) -> usize {
        self.starts.partition_point(|&s| s <= n).saturating_sub(1)
    }

    pub fn factor_at(&self, n: i128) -> &Factor {
        &self.factors[self.index_of(n)]
    }

    /// Maximal ranges `[lo, hi]` inside `[lo, hi]` on which both `mu_h` and
    /// `mu_{h+shift}` are constant, with those two factors.
    pub fn pair_pieces(
        &self,
        shift: i64,
        lo: i128,
        hi: i128,
    ) -> impl Iterator<Item = (i128, i128, &Factor, &Factor)> + '_ {
        let shift = shift as i128;
        let mut cuts: Vec<i128> = self
            .starts
            .iter()
            .skip(1)
            .flat_map(|&s| [s, s - shift])
            .filter(|&c| c > lo && c <= hi)
            .collect();
        cuts.push(lo);
        cuts.sort_unstable();
        cuts.dedup();
        let n = cuts.len();
        (0..n).map(move |i| {
            let a = cuts[i];
            let b = if i + 1 < n { cuts[i + 1] - 1 } else { hi };
            (a, b, self.factor_at(a), self.factor_at(a + shift))
        })
    }
}

/// A finite set of group elements, either listed or as integer ranges.
#[derive(Debug, Clone, PartialEq)]
pub enum Support {
    Points(Vec<GroupElem>),
    /// Disjoint sorted inclusive ranges in Z.
    Ranges(Vec<(i64, i64)>),
}

impl Support {
    pub fn len(&self) -> u128 {
        match self {
            Support::Points(p) => p.len() as u128,
            Support::Ranges(r) => r.iter().map(|(a, b)| (*b as i128 - *a as i128 + 1) as u128).sum(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn iter(&self) -> Box<dyn Iterator<Item = GroupElem> + '_> {
        match self {
            Support::Points(p) => Box::new(p.iter().cloned()),
            Support::Ranges(r) => Box::new(
                r.iter()
                    .flat_map(|&(a, b)| (a..=b).map(GroupElem::scalar)),
            ),
        }
    }

    pub fn is_within(&self, w: &Window) -> bool {
        match self {
            Support::Points(p) => p.iter().all(|h| w.contains(h)),
            Support::Ranges(r) => {
                w.dim() == 1
                    && r.iter()
                        .all(|&(a, b)| w.lo().first() <= a && b <= w.hi().first())
            }
        }
    }

    /// Elements of the support outside `w`.
    pub fn outside<'a>(&'a self, w: &'a Window) -> Box<dyn Iterator<Item = GroupElem> + 'a> {
        match self {
            Support::Points(_) => Box::new(self.iter().filter(move |h| !w.contains(h))),
            Support::Ranges(r) => {
                let (wl, wh) = (w.lo().first(), w.hi().first());
                Box::new(r.iter().flat_map(move |&(a, b)| {
                    let left = a..=b.min(wl.saturating_sub(1));
                    let right = a.max(wh.saturating_add(1))..=b;
                    left.chain(right).map(GroupElem::scalar)
                }))
            }
        }
    }

    /// Elements of the support inside `w`.
    pub fn inside<'a>(&'a self, w: &'a Window) -> Box<dyn Iterator<Item = GroupElem> + 'a> {
        match self {
            Support::Points(_) => Box::new(self.iter().filter(move |h| w.contains(h))),
            Support::Ranges(r) => {
                let (wl, wh) = (w.lo().first(), w.hi().first());
                Box::new(
                    r.iter()
                        .flat_map(move |&(a, b)| (a.max(wl)..=b.min(wh)).map(GroupElem::scalar)),
                )
            }
        }
    }
}

fn merge_ranges(mut r: Vec<(i64, i64)>) -> Vec<(i64, i64)> {
    r.sort_unstable();
    let mut out: Vec<(i64, i64)> = Vec::with_capacity(r.len());
    for (a, b) in r {
        match out.last_mut() {
            Some(last) if a <= last.1.saturating_add(1) => last.1 = last.1.max(b),
            _ => out.push((a, b)),
        }
    }
    out
}
