//! Acting groups: the integer lattices Z and Z^d.
//!
//! Elements are integer coordinate vectors under addition. The lattice is
//! abelian, so left and right translates coincide and `K g` below is the
//! set `{k + g | k in K}`.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::{Error, Result};

pub type Coords = SmallVec<[i64; 3]>;

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GroupElem(Coords);

impl GroupElem {
    pub fn new(coords: impl IntoIterator<Item = i64>) -> Self {
        GroupElem(coords.into_iter().collect())
    }

    /// Element of Z.
    pub fn scalar(n: i64) -> Self {
        GroupElem(smallvec::smallvec![n])
    }

    pub fn zero(dim: usize) -> Self {
        GroupElem(smallvec::smallvec![0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[i64] {
        &self.0
    }

    /// First coordinate; the value itself for elements of Z.
    pub fn first(&self) -> i64 {
        self.0[0]
    }

    pub fn is_identity(&self) -> bool {
        self.0.iter().all(|&c| c == 0)
    }

    pub fn op(&self, other: &GroupElem) -> Result<GroupElem> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                left: self.dim(),
                right: other.dim(),
            });
        }
        Ok(self.add_unchecked(other))
    }

    pub(crate) fn add_unchecked(&self, other: &GroupElem) -> GroupElem {
        GroupElem(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub(crate) fn sub_unchecked(&self, other: &GroupElem) -> GroupElem {
        GroupElem(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    pub fn inverse(&self) -> GroupElem {
        GroupElem(self.0.iter().map(|c| -c).collect())
    }

    pub fn abs(&self) -> GroupElem {
        GroupElem(self.0.iter().map(|c| c.abs()).collect())
    }

    /// Sup norm.
    pub fn norm_inf(&self) -> i64 {
        self.0.iter().map(|c| c.abs()).max().unwrap_or(0)
    }
}

impl fmt::Debug for GroupElem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for GroupElem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.len() == 1 {
            return write!(f, "{}", self.0[0]);
        }
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

impl From<i64> for GroupElem {
    fn from(n: i64) -> Self {
        GroupElem::scalar(n)
    }
}

/// Minimal interface of a countable amenable group as used by the averaging
/// machinery. Only the integer lattices implement it.
pub trait AmenableGroup {
    fn dim(&self) -> usize;
    fn identity(&self) -> GroupElem;
    fn op(&self, a: &GroupElem, b: &GroupElem) -> Result<GroupElem>;
    fn inverse(&self, a: &GroupElem) -> GroupElem;
    /// The canonical Følner set of radius `n`.
    fn ball(&self, n: u64) -> FiniteSubset;
}

/// Z^d with the sup-norm boxes `[-n, n]^d` as Følner sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lattice {
    dim: usize,
}

impl Lattice {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::param("dim", "lattice dimension must be at least 1"));
        }
        Ok(Lattice { dim })
    }

    pub fn integers() -> Self {
        Lattice { dim: 1 }
    }
}

impl AmenableGroup for Lattice {
    fn dim(&self) -> usize {
        self.dim
    }

    fn identity(&self) -> GroupElem {
        GroupElem::zero(self.dim)
    }

    fn op(&self, a: &GroupElem, b: &GroupElem) -> Result<GroupElem> {
        if a.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                left: a.dim(),
                right: self.dim,
            });
        }
        a.op(b)
    }

    fn inverse(&self, a: &GroupElem) -> GroupElem {
        a.inverse()
    }

    fn ball(&self, n: u64) -> FiniteSubset {
        let n = n as i64;
        FiniteSubset::box_set(&vec![(-n, n); self.dim])
    }
}

/// Finite deduplicated set of group elements, kept in lexicographic order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FiniteSubset {
    elements: BTreeSet<GroupElem>,
}

impl FiniteSubset {
    pub fn new(elements: impl IntoIterator<Item = GroupElem>) -> Self {
        FiniteSubset {
            elements: elements.into_iter().collect(),
        }
    }

    /// Integer interval `[lo, hi]` in Z.
    pub fn interval(lo: i64, hi: i64) -> Self {
        FiniteSubset::new((lo..=hi).map(GroupElem::scalar))
    }

    /// Product of closed integer intervals, one per axis.
    pub fn box_set(bounds: &[(i64, i64)]) -> Self {
        let mut out = vec![GroupElem::new(std::iter::empty())];
        for &(lo, hi) in bounds {
            let mut next = Vec::with_capacity(out.len() * (hi - lo + 1).max(0) as usize);
            for prefix in &out {
                for c in lo..=hi {
                    let mut e = prefix.0.clone();
                    e.push(c);
                    next.push(GroupElem(e));
                }
            }
            out = next;
        }
        FiniteSubset::new(out)
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn contains(&self, g: &GroupElem) -> bool {
        self.elements.contains(g)
    }

    pub fn iter(&self) -> impl Iterator<Item = &GroupElem> {
        self.elements.iter()
    }

    pub fn is_subset(&self, other: &FiniteSubset) -> bool {
        self.elements.is_subset(&other.elements)
    }

    /// Translate `F g`.
    pub fn translate(&self, g: &GroupElem) -> FiniteSubset {
        FiniteSubset::new(self.elements.iter().map(|h| h.add_unchecked(g)))
    }
}

impl FromIterator<GroupElem> for FiniteSubset {
    fn from_iter<I: IntoIterator<Item = GroupElem>>(iter: I) -> Self {
        FiniteSubset::new(iter)
    }
}

/// Closed integer box `[lo_1, hi_1] x ... x [lo_d, hi_d]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    lo: GroupElem,
    hi: GroupElem,
}

impl Window {
    pub fn new(lo: GroupElem, hi: GroupElem) -> Result<Self> {
        if lo.dim() != hi.dim() {
            return Err(Error::DimensionMismatch {
                left: lo.dim(),
                right: hi.dim(),
            });
        }
        if lo.coords().iter().zip(hi.coords()).any(|(a, b)| a > b) {
            return Err(Error::param("window", format!("empty box {lo}..{hi}")));
        }
        Ok(Window { lo, hi })
    }

    pub fn interval(lo: i64, hi: i64) -> Result<Self> {
        Window::new(GroupElem::scalar(lo), GroupElem::scalar(hi))
    }

    /// `[-r, r]^dim`.
    pub fn centered(dim: usize, r: i64) -> Self {
        Window {
            lo: GroupElem::new(std::iter::repeat(-r).take(dim)),
            hi: GroupElem::new(std::iter::repeat(r).take(dim)),
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.dim()
    }

    pub fn lo(&self) -> &GroupElem {
        &self.lo
    }

    pub fn hi(&self) -> &GroupElem {
        &self.hi
    }

    pub fn contains(&self, h: &GroupElem) -> bool {
        h.dim() == self.dim()
            && h.coords()
                .iter()
                .zip(self.lo.coords().iter().zip(self.hi.coords()))
                .all(|(c, (lo, hi))| lo <= c && c <= hi)
    }

    pub fn len(&self) -> u128 {
        self.lo
            .coords()
            .iter()
            .zip(self.hi.coords())
            .map(|(lo, hi)| (*hi as i128 - *lo as i128 + 1) as u128)
            .product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn to_subset(&self) -> FiniteSubset {
        let bounds: Vec<(i64, i64)> = self
            .lo
            .coords()
            .iter()
            .copied()
            .zip(self.hi.coords().iter().copied())
            .collect();
        FiniteSubset::box_set(&bounds)
    }

    /// Elements in lexicographic order.
    pub fn iter(&self) -> impl Iterator<Item = GroupElem> + '_ {
        let dim = self.dim();
        let mut cur: Option<Coords> = Some(self.lo.0.clone());
        std::iter::from_fn(move || {
            let out = cur.clone()?;
            let mut next = out.clone();
            let mut axis = dim;
            loop {
                if axis == 0 {
                    cur = None;
                    break;
                }
                axis -= 1;
                if next[axis] < self.hi.0[axis] {
                    next[axis] += 1;
                    cur = Some(next);
                    break;
                }
                next[axis] = self.lo.0[axis];
            }
            Some(GroupElem(out))
        })
    }
}

/// Fraction of `g` in `F` with `K g` contained in `F`.
///
/// `F` is `[K, eps]`-invariant exactly when this exceeds `1 - eps`.
pub fn invariance_fraction(f: &FiniteSubset, k: &FiniteSubset) -> Result<f64> {
    if f.is_empty() {
        return Err(Error::EmptySet);
    }
    let dim = f.iter().next().map(GroupElem::dim).unwrap_or(0);
    if let Some(bad) = f.iter().chain(k.iter()).find(|e| e.dim() != dim) {
        return Err(Error::DimensionMismatch {
            left: dim,
            right: bad.dim(),
        });
    }
    let good = f
        .iter()
        .filter(|g| k.iter().all(|kk| f.contains(&kk.add_unchecked(g))))
        .count();
    Ok(good as f64 / f.len() as f64)
}

pub fn is_invariant(f: &FiniteSubset, k: &FiniteSubset, eps: f64) -> Result<bool> {
    Ok(invariance_fraction(f, k)? > 1.0 - eps)
}

/// The canonical Følner set `[-n, n]^d` of the lattice.
pub fn folner(model: &Lattice, n: u64) -> Result<FiniteSubset> {
    if n == 0 {
        return Err(Error::param("n", "Følner index must be at least 1"));
    }
    Ok(model.ball(n))
}

/// An increasing sequence of canonical boxes, described by their radii.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FolnerSequence {
    model: Lattice,
    radii: Vec<u64>,
}

impl FolnerSequence {
    pub fn new(model: Lattice, radii: Vec<u64>) -> Result<Self> {
        if radii.is_empty() {
            return Err(Error::param("radii", "Følner sequence needs at least one set"));
        }
        if radii[0] == 0 {
            return Err(Error::param("radii", "radii must be positive"));
        }
        if radii.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::param("radii", "radii must be strictly increasing"));
        }
        Ok(FolnerSequence { model, radii })
    }

    /// Radii 1, 2, 4, ... below `max`, then `max` itself.
    pub fn doubling(model: Lattice, max: u64) -> Result<Self> {
        let mut radii = Vec::new();
        let mut r = 1u64;
        while r < max {
            radii.push(r);
            r *= 2;
        }
        radii.push(max.max(1));
        FolnerSequence::new(model, radii)
    }

    pub fn model(&self) -> Lattice {
        self.model
    }

    pub fn radii(&self) -> &[u64] {
        &self.radii
    }

    pub fn len(&self) -> usize {
        self.radii.len()
    }

    pub fn is_empty(&self) -> bool {
        self.radii.is_empty()
    }

    pub fn set(&self, i: usize) -> FiniteSubset {
        self.model.ball(self.radii[i])
    }

    pub fn set_size(&self, i: usize) -> u64 {
        (2 * self.radii[i] + 1).pow(self.model.dim as u32)
    }

    /// Invariance fractions of every set of the sequence with respect to `k`.
    pub fn certificates(&self, k: &FiniteSubset) -> Result<Vec<f64>> {
        (0..self.len())
            .map(|i| invariance_fraction(&self.set(i), k))
            .collect()
    }

    /// Whether the last set contains every requested element.
    pub fn exhausts<'a>(&self, elems: impl IntoIterator<Item = &'a GroupElem>) -> bool {
        let r = *self.radii.last().unwrap() as i64;
        elems.into_iter().all(|e| e.norm_inf() <= r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn z(n: i64) -> GroupElem {
        GroupElem::scalar(n)
    }

    #[test]
    fn op_examples() {
        assert_eq!(z(2).op(&z(3)).unwrap(), z(5));
        let a = GroupElem::new([3, -4]);
        assert_eq!(GroupElem::zero(2).op(&a).unwrap(), a);
        let b = GroupElem::new([1, -2]);
        assert_eq!(b.op(&GroupElem::new([-1, 2])).unwrap(), GroupElem::zero(2));
        assert!(matches!(
            z(1).op(&GroupElem::zero(2)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn group_axioms_exhaustive_z2() {
        let pts: Vec<GroupElem> = FiniteSubset::box_set(&[(-5, 5), (-5, 5)]).iter().cloned().collect();
        let e = GroupElem::zero(2);
        for a in &pts {
            assert_eq!(a.op(&e).unwrap(), *a);
            assert_eq!(a.op(&a.inverse()).unwrap(), e);
        }
        // associativity on a coarser grid keeps this quick
        for a in pts.iter().step_by(7) {
            for b in pts.iter().step_by(5) {
                for c in pts.iter().step_by(3) {
                    let l = a.op(b).unwrap().op(c).unwrap();
                    let r = a.op(&b.op(c).unwrap()).unwrap();
                    assert_eq!(l, r);
                }
            }
        }
    }

    #[test]
    fn invariance_fraction_examples() {
        let f = FiniteSubset::interval(0, 99);
        let id = FiniteSubset::new([z(0)]);
        assert_eq!(invariance_fraction(&f, &id).unwrap(), 1.0);
        let k = FiniteSubset::new([z(0), z(1)]);
        assert_eq!(invariance_fraction(&f, &k).unwrap(), 0.99);

        let sq = FiniteSubset::box_set(&[(0, 9), (0, 9)]);
        let l = FiniteSubset::new([
            GroupElem::new([0, 0]),
            GroupElem::new([1, 0]),
            GroupElem::new([0, 1]),
        ]);
        assert_eq!(invariance_fraction(&sq, &l).unwrap(), 0.81);
        assert!(is_invariant(&sq, &l, 0.2).unwrap());
        assert!(!is_invariant(&sq, &l, 0.19).unwrap());
    }

    #[test]
    fn invariance_fraction_rejects_empty() {
        let k = FiniteSubset::new([z(0)]);
        assert_eq!(invariance_fraction(&FiniteSubset::default(), &k), Err(Error::EmptySet));
    }

    #[test]
    fn folner_examples() {
        let zz = Lattice::integers();
        assert_eq!(folner(&zz, 1).unwrap(), FiniteSubset::interval(-1, 1));
        assert_eq!(folner(&zz, 3).unwrap().len(), 7);
        let z2 = Lattice::new(2).unwrap();
        assert_eq!(folner(&z2, 2).unwrap().len(), 25);
        assert!(folner(&zz, 0).is_err());
    }

    #[test]
    fn folner_certificates_nondecreasing() {
        let z2 = Lattice::new(2).unwrap();
        let k = FiniteSubset::new([
            GroupElem::new([0, 0]),
            GroupElem::new([2, -1]),
            GroupElem::new([-1, 1]),
        ]);
        let seq = FolnerSequence::new(z2, (4..=12).collect()).unwrap();
        let certs = seq.certificates(&k).unwrap();
        assert!(certs.windows(2).all(|w| w[0] <= w[1]), "{certs:?}");
        assert!(*certs.last().unwrap() > 0.75);
        for i in 1..seq.len() {
            assert!(seq.set(i - 1).is_subset(&seq.set(i)));
            assert_eq!(seq.set(i).len() as u64, seq.set_size(i));
        }
    }

    #[test]
    fn window_iteration_matches_box_set() {
        let w = Window::new(GroupElem::new([-1, 2]), GroupElem::new([1, 4])).unwrap();
        let listed: Vec<GroupElem> = w.iter().collect();
        assert_eq!(listed.len() as u128, w.len());
        assert_eq!(FiniteSubset::new(listed), w.to_subset());
        assert!(w.contains(&GroupElem::new([0, 3])));
        assert!(!w.contains(&GroupElem::new([0, 5])));
        assert!(Window::interval(3, 2).is_err());
    }

    #[test]
    fn folner_sequence_validation() {
        let zz = Lattice::integers();
        assert!(FolnerSequence::new(zz, vec![2, 2]).is_err());
        assert!(FolnerSequence::new(zz, vec![]).is_err());
        let d = FolnerSequence::doubling(zz, 10).unwrap();
        assert_eq!(d.radii(), &[1, 2, 4, 8, 10]);
        assert!(d.exhausts([&z(-10), &z(7)]));
        assert!(!d.exhausts([&z(11)]));
    }
}
