use nsshift::cocycles::{tail_cocycle, TailPair, PatternPoint};
use nsshift::markov::{
    markov_measure, markov_shifted_cocycle, markov_tail_cocycle, primitivity, transition_bound,
    MarkovConfig, MarkovPair, MarkovSpec, PathCylinder,
};
use nsshift::measures::{Alphabet, MeasureFamily, ProbVector, Symbol};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Irreducible and aperiodic structure: full, or `a -> 0` and `a -> a+1`.
fn structure(s: usize, full: bool) -> Vec<Vec<u8>> {
    (0..s)
        .map(|a| {
            (0..s)
                .map(|b| (full || b == 0 || b == (a + 1) % s) as u8)
                .collect()
        })
        .collect()
}

fn random_matrix(rng: &mut ChaCha8Rng, m: &[Vec<u8>]) -> Vec<Vec<f64>> {
    m.iter()
        .map(|row| {
            let w: Vec<f64> = row
                .iter()
                .map(|&b| if b == 1 { rng.gen_range(0.1..1.0) } else { 0.0 })
                .collect();
            let t: f64 = w.iter().sum();
            w.iter().map(|v| v / t).collect()
        })
        .collect()
}

fn random_spec(seed: u64) -> MarkovSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = rng.gen_range(2..=4);
    let m = structure(s, rng.gen_bool(0.5));
    let len = rng.gen_range(0..8);
    MarkovConfig {
        left: random_matrix(&mut rng, &m),
        left_pi: None,
        start: rng.gen_range(-5..=2),
        window: (0..len).map(|_| random_matrix(&mut rng, &m)).collect(),
        right: Some(random_matrix(&mut rng, &m)),
        marginals: None,
        offset: 0,
        structure: m,
    }
    .try_into()
    .unwrap()
}

fn random_path(rng: &mut ChaCha8Rng, spec: &MarkovSpec, len: usize) -> Vec<Symbol> {
    let s = spec.states();
    let mut p = vec![rng.gen_range(0..s) as Symbol];
    while p.len() < len {
        let a = *p.last().unwrap();
        let next: Vec<Symbol> = (0..s as Symbol).filter(|&b| spec.allowed(a, b)).collect();
        p.push(next[rng.gen_range(0..next.len())]);
    }
    p
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn kolmogorov_consistency(seed in any::<u64>(), len in 1usize..=6, start in -10i64..10) {
        let spec = random_spec(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        let cyl = PathCylinder::new(start, random_path(&mut rng, &spec, len)).unwrap();
        let base = markov_measure(&spec, &cyl).unwrap();
        prop_assert!((0.0..=1.0).contains(&base));
        let s = spec.states() as Symbol;
        let last = *cyl.symbols.last().unwrap();
        let right: f64 = (0..s)
            .filter(|&b| spec.allowed(last, b))
            .map(|b| markov_measure(&spec, &cyl.extended_right(b)).unwrap())
            .sum();
        let first = cyl.symbols[0];
        let left: f64 = (0..s)
            .filter(|&b| spec.allowed(b, first))
            .map(|b| markov_measure(&spec, &cyl.extended_left(b)).unwrap())
            .sum();
        prop_assert!((right - base).abs() < 1e-12, "{right} vs {base}");
        prop_assert!((left - base).abs() < 1e-12, "{left} vs {base}");
    }

    #[test]
    fn cocycle_identities(seed in any::<u64>(), len in 2usize..=8, start in -8i64..8, n in -6i64..6) {
        let spec = random_spec(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 2);
        // three paths sharing both end symbols
        let x = random_path(&mut rng, &spec, len);
        let mut others = Vec::new();
        while others.len() < 2 {
            let p = random_path(&mut rng, &spec, len);
            if p[0] == x[0] && p[len - 1] == x[len - 1] {
                others.push(p);
            }
        }
        let (y, z) = (others[0].clone(), others[1].clone());
        let c = |a: &Vec<Symbol>, b: &Vec<Symbol>| {
            markov_tail_cocycle(&spec, &MarkovPair::new(start, a.clone(), b.clone()).unwrap())
                .unwrap()
                .log_value
        };
        prop_assert!((c(&x, &z) - c(&x, &y) - c(&y, &z)).abs() < 1e-12);
        prop_assert!((c(&x, &y) + c(&y, &x)).abs() < 1e-12);

        let pair = MarkovPair::new(start, x, y).unwrap();
        let shifted = markov_shifted_cocycle(&spec, &pair, n).unwrap().log_value;
        let moved = markov_tail_cocycle(&spec, &pair.translate(n)).unwrap().log_value;
        prop_assert!((shifted - moved).abs() < 1e-12);

        // every changed transition ratio lies in [delta, 1/delta]
        let lo = start + n;
        let delta = transition_bound(&spec, lo, lo + len as i64).unwrap().delta;
        let m = pair.differing() as f64;
        prop_assert!(shifted.abs() <= 2.0 * m * -delta.ln() + 1e-12);
    }

    #[test]
    fn product_reduction(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = rng.gen_range(2..=3);
        let pv = |rng: &mut ChaCha8Rng| {
            let w: Vec<f64> = (0..k).map(|_| rng.gen_range(0.05..1.0)).collect();
            let t: f64 = w.iter().sum();
            ProbVector::new(w.iter().map(|v| v / t)).unwrap()
        };
        let factors = (0..6).map(|_| pv(&mut rng)).collect();
        let fam = MeasureFamily::table_z(-3, factors, pv(&mut rng)).unwrap();
        let spec = MarkovSpec::from_product_family(&fam, -5, 5).unwrap();

        let len = rng.gen_range(1..=6);
        let start = rng.gen_range(-5..=(5 - len as i64 + 1));
        let symbols: Vec<Symbol> = (0..len).map(|_| rng.gen_range(0..k) as Symbol).collect();
        let want: f64 = symbols
            .iter()
            .enumerate()
            .map(|(i, &a)| fam.prob_z(start + i as i64, a))
            .product();
        let got = markov_measure(&spec, &PathCylinder::new(start, symbols).unwrap()).unwrap();
        prop_assert!((got - want).abs() < 1e-12);

        let x: Vec<Symbol> = (0..9).map(|_| rng.gen_range(0..k) as Symbol).collect();
        let mut y: Vec<Symbol> = (0..9).map(|_| rng.gen_range(0..k) as Symbol).collect();
        y[0] = x[0];
        y[8] = x[8];
        let alphabet = Alphabet::new(k).unwrap();
        let px = PatternPoint::from_z(alphabet, -4, &x, 0).unwrap();
        let py = PatternPoint::from_z(alphabet, -4, &y, 0).unwrap();
        let a = markov_tail_cocycle(&spec, &MarkovPair::new(-4, x, y).unwrap()).unwrap().log_value;
        let b = tail_cocycle(&fam, &TailPair::between(&px, &py).unwrap()).unwrap().log_value;
        prop_assert!((a - b).abs() < 1e-12);
    }
}

/// Boolean powers up to the Wielandt bound, no early exit.
fn primitive_by_powers(m: &[Vec<bool>]) -> Option<usize> {
    let s = m.len();
    let mut p = m.to_vec();
    for n in 1..=(s - 1) * (s - 1) + 1 {
        if p.iter().flatten().all(|&v| v) {
            return Some(n);
        }
        let mut q = vec![vec![false; s]; s];
        for a in 0..s {
            for c in 0..s {
                if p[a][c] {
                    for b in 0..s {
                        q[a][b] |= m[c][b];
                    }
                }
            }
        }
        p = q;
    }
    None
}

#[test]
fn primitivity_exhaustive_three_states() {
    for bits in 0u32..(1 << 9) {
        let m: Vec<Vec<bool>> = (0..3)
            .map(|a| (0..3).map(|b| bits >> (3 * a + b) & 1 == 1).collect())
            .collect();
        assert_eq!(primitivity(&m), primitive_by_powers(&m), "{m:?}");
    }
}

#[test]
fn serde_round_trip_through_json() {
    let spec = random_spec(7).translated(-2);
    let text = serde_json::to_string(&spec).unwrap();
    let back: MarkovSpec = serde_json::from_str(&text).unwrap();
    assert_eq!(back, spec);
}
