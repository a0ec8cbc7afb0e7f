//! Partial sums of the series attached to a family over the window
//! `|h| <= N` (sup norm).

use crate::error::{Error, Result};
use crate::group::{GroupElem, Window};
use crate::measures::MeasureFamily;

/// Windows larger than this are refused when no segment decomposition or
/// support certificate lets us skip the zero terms.
const DIRECT_LIMIT: u128 = 50_000_000;

/// Sum of a pair term over a maximal range `[lo, hi]` where it is constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Piece {
    pub lo: i128,
    pub hi: i128,
    pub sum: f64,
}

fn clip(n: u64) -> i64 {
    n.min(i64::MAX as u64) as i64
}

/// Pieces of `sum_{lo <= h <= hi} term(mu_h, mu_{h+shift})` for a
/// one-dimensional family with segments; `None` otherwise.
pub fn pair_pieces(
    fam: &MeasureFamily,
    shift: i64,
    lo: i64,
    hi: i64,
    term: impl Fn(&[f64], &[f64]) -> f64,
) -> Option<Vec<Piece>> {
    let seg = fam.segments()?;
    Some(
        seg.pair_pieces(shift, lo as i128, hi as i128)
            .map(|(a, b, p, q)| Piece {
                lo: a,
                hi: b,
                sum: (b - a + 1) as f64 * term(p, q),
            })
            .collect(),
    )
}

/// `sum_{|h| <= n} term(mu_h, mu_{h+shift})`. When `zero_on_diagonal`, the
/// term vanishes for equal factors and the sum may be restricted to the
/// discrepancy support.
fn pair_sum(
    fam: &MeasureFamily,
    shift: &GroupElem,
    n: u64,
    zero_on_diagonal: bool,
    term: impl Fn(&[f64], &[f64]) -> f64,
) -> Result<f64> {
    if shift.dim() != fam.dim() {
        return Err(Error::DimensionMismatch {
            left: fam.dim(),
            right: shift.dim(),
        });
    }
    let r = clip(n);
    if let Some(pieces) = pair_pieces(fam, shift.first(), -r, r, &term).filter(|_| fam.dim() == 1) {
        return Ok(pieces.iter().map(|p| p.sum).sum());
    }
    let window = Window::centered(fam.dim(), r);
    if zero_on_diagonal {
        if let Some(supp) = fam.discrepancy_support(shift) {
            return Ok(supp
                .inside(&window)
                .map(|h| term(&fam.factor(&h), &fam.factor(&h.add_unchecked(shift))))
                .sum());
        }
    }
    if window.len() > DIRECT_LIMIT {
        return Err(Error::param(
            "window",
            format!(
                "{} terms exceed the direct summation limit for a family without segments",
                window.len()
            ),
        ));
    }
    Ok(window
        .iter()
        .map(|h| term(&fam.factor(&h), &fam.factor(&h.add_unchecked(shift))))
        .sum())
}

/// `sum_{lo <= n <= hi} term(mu_n)` for a one-dimensional family, piece by
/// piece when the family has segments.
pub fn range_sum(
    fam: &MeasureFamily,
    lo: i64,
    hi: i64,
    term: impl Fn(&[f64]) -> f64,
) -> Result<f64> {
    if fam.dim() != 1 {
        return Err(Error::NotOneDimensional);
    }
    if lo > hi {
        return Ok(0.0);
    }
    if let Some(pieces) = pair_pieces(fam, 0, lo, hi, |p, _| term(p)) {
        return Ok(pieces.iter().map(|p| p.sum).sum());
    }
    if (hi as i128 - lo as i128) as u128 >= DIRECT_LIMIT {
        return Err(Error::param(
            "window",
            "range exceeds the direct summation limit for a family without segments",
        ));
    }
    Ok((lo..=hi).map(|n| term(&fam.factor_z(n))).sum())
}

/// `sum_{|h| <= n} term(mu_h)` over the sup-norm box.
pub fn window_sum(fam: &MeasureFamily, n: u64, term: impl Fn(&[f64]) -> f64) -> Result<f64> {
    let zero = GroupElem::zero(fam.dim());
    pair_sum(fam, &zero, n, false, |p, _| term(p))
}

/// `sum_{|h| <= n} log max_a mu_h(a)`; diverges to `-inf` iff the product
/// measure is non-atomic.
pub fn non_atomicity_series(fam: &MeasureFamily, n: u64) -> Result<f64> {
    window_sum(fam, n, |p| p.iter().copied().fold(0.0, f64::max).ln())
}

/// Hellinger-type sum `sum_{|h| <= n} sum_a (sqrt mu_h(a) - sqrt mu_{g^-1 h}(a))^2`.
pub fn kakutani_series(fam: &MeasureFamily, g: &GroupElem, n: u64) -> Result<f64> {
    pair_sum(fam, &g.inverse(), n, true, |p, q| {
        p.iter()
            .zip(q)
            .map(|(a, b)| (a.sqrt() - b.sqrt()).powi(2))
            .sum()
    })
}

/// `sum_{|j| <= n} |mu_{j+shift}(0) - mu_j(0)|^2` for a binary family on Z.
pub fn sq_diff_series(fam: &MeasureFamily, shift: i64, n: u64) -> Result<f64> {
    if fam.k() != 2 {
        return Err(Error::NotBinary(fam.k()));
    }
    if fam.dim() != 1 {
        return Err(Error::NotOneDimensional);
    }
    pair_sum(fam, &GroupElem::scalar(shift), n, true, |p, q| (q[0] - p[0]).powi(2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{Example33, Example33Params, ProbVector};
    use proptest::prelude::*;

    fn bump() -> MeasureFamily {
        MeasureFamily::table_z(
            0,
            vec![ProbVector::binary(0.3).unwrap()],
            ProbVector::uniform(2).unwrap(),
        )
        .unwrap()
    }

    fn brute_kakutani(fam: &MeasureFamily, g: i64, n: i64) -> f64 {
        (-n..=n)
            .map(|h| {
                (0..fam.k() as u8)
                    .map(|a| (fam.prob_z(h, a).sqrt() - fam.prob_z(h - g, a).sqrt()).powi(2))
                    .sum::<f64>()
            })
            .sum()
    }

    #[test]
    fn stationary_series() {
        let fam = MeasureFamily::stationary(ProbVector::uniform(2).unwrap(), 1);
        let n = 37;
        let s = non_atomicity_series(&fam, n).unwrap();
        assert!((s - 75.0 * 0.5f64.ln()).abs() < 1e-12);
        assert_eq!(kakutani_series(&fam, &GroupElem::scalar(3), 1000).unwrap(), 0.0);
        assert_eq!(sq_diff_series(&fam, 5, 1000).unwrap(), 0.0);
    }

    #[test]
    fn kakutani_single_bump() {
        let fam = bump();
        let expected = 2.0
            * ((0.5f64.sqrt() - 0.3f64.sqrt()).powi(2) + (0.5f64.sqrt() - 0.7f64.sqrt()).powi(2));
        let got = kakutani_series(&fam, &GroupElem::scalar(1), 10).unwrap();
        assert!((got - expected).abs() < 1e-15);
        assert!((brute_kakutani(&fam, 1, 10) - expected).abs() < 1e-15);
    }

    #[test]
    fn kakutani_in_two_dimensions_uses_support() {
        let fam = MeasureFamily::table(
            2,
            [(GroupElem::new([1, -1]), ProbVector::new([0.2, 0.3, 0.5]).unwrap())].into(),
            ProbVector::uniform(3).unwrap(),
        )
        .unwrap();
        let g = GroupElem::new([0, 2]);
        let fast = kakutani_series(&fam, &g, 5).unwrap();
        let direct: f64 = Window::centered(2, 5)
            .iter()
            .map(|h| {
                let p = fam.factor(&h);
                let q = fam.factor(&h.sub_unchecked(&g));
                p.iter().zip(&q).map(|(a, b)| (a.sqrt() - b.sqrt()).powi(2)).sum::<f64>()
            })
            .sum();
        assert!((fast - direct).abs() < 1e-15);
        assert!(fast > 0.0);
    }

    #[test]
    fn sq_diff_rejects_non_binary() {
        let fam = MeasureFamily::stationary(ProbVector::uniform(3).unwrap(), 1);
        assert_eq!(sq_diff_series(&fam, 1, 10), Err(Error::NotBinary(3)));
    }

    #[test]
    fn example33_series_bounds() {
        let ex = Example33::build(Example33Params::new(0.4, 33.0, 10, 9.0)).unwrap();
        let fam = ex.family();
        let lam = 0.4f64;
        let per_term = (1.0 - lam / 2.0).ln();
        for n in [10u64, 100, 1000, 100_000] {
            let s = non_atomicity_series(&fam, n).unwrap();
            assert!(s <= (2 * n + 1) as f64 * per_term + 1e-9);
        }
        // Hellinger terms are dominated by squared differences over 4 * min
        let cert = 4.0 * ex.sum_alpha_sq(ex.levels()) / (lam / 2.0);
        let mut prev = 0.0;
        for n in [10u64, 1000, 1 << 20, 1 << 40, u64::MAX] {
            let s = kakutani_series(&fam, &GroupElem::scalar(1), n).unwrap();
            assert!(s >= prev && s <= cert, "{s} vs {cert}");
            prev = s;
        }
    }

    #[test]
    fn closure_family_falls_back_to_direct_sum() {
        let fam = MeasureFamily::binary_fn(|n| 0.5 - 0.4 / (2.0 + n.abs() as f64), None).unwrap();
        let got = kakutani_series(&fam, &GroupElem::scalar(2), 50).unwrap();
        assert!((got - brute_kakutani(&fam, 2, 50)).abs() < 1e-14);
        assert!(kakutani_series(&fam, &GroupElem::scalar(2), 1 << 40).is_err());
    }

    fn arb_table() -> impl Strategy<Value = MeasureFamily> {
        (
            -6i64..6,
            prop::collection::vec(0.05f64..0.95, 1..6),
            0.05f64..0.95,
            any::<bool>(),
        )
            .prop_map(|(start, ps, d, sym)| {
                let factors = ps.into_iter().map(|p| ProbVector::binary(p).unwrap()).collect();
                MeasureFamily::table_z(start, factors, ProbVector::binary(d).unwrap())
                    .unwrap()
                    .with_symmetric(sym)
            })
    }

    proptest! {
        #[test]
        fn segment_sums_match_brute_force(fam in arb_table(), g in -8i64..8, n in 0u64..30) {
            let fast = kakutani_series(&fam, &GroupElem::scalar(g), n).unwrap();
            prop_assert!((fast - brute_kakutani(&fam, g, n as i64)).abs() < 1e-12);
            let sq = sq_diff_series(&fam, g, n).unwrap();
            let brute_sq: f64 = (-(n as i64)..=n as i64)
                .map(|j| (fam.prob_z(j + g, 0) - fam.prob_z(j, 0)).powi(2))
                .sum();
            prop_assert!((sq - brute_sq).abs() < 1e-12);
        }

        #[test]
        fn series_are_monotone_in_window(fam in arb_table(), g in -8i64..8, n in 0u64..40) {
            let g = GroupElem::scalar(g);
            prop_assert!(kakutani_series(&fam, &g, n).unwrap() <= kakutani_series(&fam, &g, n + 1).unwrap());
            prop_assert!(non_atomicity_series(&fam, n + 1).unwrap() <= non_atomicity_series(&fam, n).unwrap());
        }

        #[test]
        fn hellinger_dominated_by_squared_difference(fam in arb_table(), g in -8i64..8, h in -12i64..12) {
            // (sqrt p - sqrt q)^2 <= (p - q)^2 / (4 delta) per coordinate
            let delta = fam.lower_bound().unwrap();
            for a in 0..2u8 {
                let (p, q) = (fam.prob_z(h, a), fam.prob_z(h + g, a));
                prop_assert!((p.sqrt() - q.sqrt()).powi(2) <= (p - q).powi(2) / (4.0 * delta) + 1e-15);
            }
        }
    }
}
