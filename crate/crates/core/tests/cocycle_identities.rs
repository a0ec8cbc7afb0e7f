use nsshift::cocycles::{
    rn_derivative_exact, shifted_tail_cocycle, tail_cocycle, uniform_bound_log, PatternPoint,
    TailPair,
};
use nsshift::group::GroupElem;
use nsshift::measures::{Alphabet, MeasureFamily, ProbVector, Symbol};
use proptest::prelude::*;

const LO: i64 = -6;
const SPAN: usize = 13;

/// A table family on `[LO, LO + SPAN)` over `k` symbols, every entry at
/// least 0.05.
fn family(k: usize) -> impl Strategy<Value = (MeasureFamily, f64)> {
    prop::collection::vec(prop::collection::vec(1.0f64..20.0, k), SPAN + 1).prop_map(move |w| {
        let to_pv = |r: &Vec<f64>| {
            let t: f64 = r.iter().sum();
            ProbVector::new(r.iter().map(|v| v / t)).unwrap()
        };
        let factors: Vec<ProbVector> = w[..SPAN].iter().map(to_pv).collect();
        let default = to_pv(&w[SPAN]);
        let delta = factors
            .iter()
            .chain(std::iter::once(&default))
            .map(|p| p.min())
            .fold(1.0, f64::min);
        (MeasureFamily::table_z(LO, factors, default).unwrap(), delta)
    })
}

fn point(k: usize) -> impl Strategy<Value = Vec<Symbol>> {
    prop::collection::vec(0..k as Symbol, SPAN)
}

fn mk(k: usize, s: &[Symbol]) -> PatternPoint {
    PatternPoint::from_z(Alphabet::new(k).unwrap(), LO, s, 0).unwrap()
}

fn instance() -> impl Strategy<Value = (usize, MeasureFamily, f64, Vec<Symbol>, Vec<Symbol>, Vec<Symbol>, i64)> {
    (2usize..=4).prop_flat_map(|k| {
        (Just(k), family(k), point(k), point(k), point(k), -8i64..=8)
            .prop_map(|(k, (f, d), x, y, z, g)| (k, f, d, x, y, z, g))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn chain_and_inversion((k, fam, _d, x, y, z, _g) in instance()) {
        let (x, y, z) = (mk(k, &x), mk(k, &y), mk(k, &z));
        let xy = tail_cocycle(&fam, &TailPair::between(&x, &y).unwrap()).unwrap().log_value;
        let yz = tail_cocycle(&fam, &TailPair::between(&y, &z).unwrap()).unwrap().log_value;
        let xz = tail_cocycle(&fam, &TailPair::between(&x, &z).unwrap()).unwrap().log_value;
        let yx = tail_cocycle(&fam, &TailPair::between(&y, &x).unwrap()).unwrap().log_value;
        prop_assert!((xz - (xy + yz)).abs() < 1e-12);
        prop_assert!((xy + yx).abs() < 1e-12);
    }

    #[test]
    fn equivariance((k, fam, _d, x, y, _z, g) in instance()) {
        let pair = TailPair::between(&mk(k, &x), &mk(k, &y)).unwrap();
        let g = GroupElem::scalar(g);
        let moved = tail_cocycle(&fam, &pair.translate(&g).unwrap()).unwrap().log_value;
        let shifted = shifted_tail_cocycle(&fam, &pair, &g).unwrap().log_value;
        let relabeled = tail_cocycle(&fam.translated(&g).unwrap(), &pair).unwrap().log_value;
        prop_assert!((moved - shifted).abs() < 1e-12);
        prop_assert!((relabeled - shifted).abs() < 1e-12);
    }

    #[test]
    fn uniform_bound_holds((k, fam, delta, x, y, _z, g) in instance()) {
        let pair = TailPair::between(&mk(k, &x), &mk(k, &y)).unwrap();
        let v = shifted_tail_cocycle(&fam, &pair, &GroupElem::scalar(g)).unwrap().log_value;
        prop_assert!(v.abs() <= uniform_bound_log(delta, pair.len()) + 1e-12);
    }

    #[test]
    fn rn_derivative_is_a_cocycle((k, fam, _d, x, _y, _z, g) in instance(), h in -8i64..=8) {
        let x = mk(k, &x);
        let (g, h) = (GroupElem::scalar(g), GroupElem::scalar(h));
        let gh = g.op(&h).unwrap();
        let whole = rn_derivative_exact(&fam, &gh, &x).unwrap().log_value;
        let parts = rn_derivative_exact(&fam, &g, &x).unwrap().log_value
            + rn_derivative_exact(&fam, &h, &x.translate(&g).unwrap()).unwrap().log_value;
        prop_assert!((whole - parts).abs() < 1e-12, "{whole} vs {parts}");
    }
}

#[test]
fn single_site_ratio() {
    let fam = MeasureFamily::table_z(
        0,
        vec![ProbVector::binary(0.3).unwrap(), ProbVector::binary(0.8).unwrap()],
        ProbVector::binary(0.5).unwrap(),
    )
    .unwrap();
    let x = mk(2, &[0; SPAN]);
    let y = x.clone().with(GroupElem::scalar(1), 1).unwrap();
    let v = tail_cocycle(&fam, &TailPair::between(&x, &y).unwrap()).unwrap();
    assert!(v.exact);
    assert!((v.value() - 0.2 / 0.8).abs() < 1e-15);
}
