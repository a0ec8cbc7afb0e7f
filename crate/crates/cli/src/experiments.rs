//! One function per experiment kind, each turning a validated spec into
//! tables and checks.

use nsshift::cocycles::{
    negative_side_threshold, permuted_pair, regular_bound_log, shifted_tail_cocycle,
    symmetric_shifted_cocycle, uniform_bound_log, PatternPoint, Permutation, TailPair,
};
use nsshift::diagnostics::{
    conservativity_series, d_regularity, kakutani_report, non_atomicity_report,
    semistationarity_probe, symmetric_ergodicity, InnerTail, SeriesReport, ShiftSelection,
    Thresholds, INNER_TAIL_TOLERANCE,
};
use nsshift::engine::{product_weak_mixing_probe, ratio_average};
use nsshift::group::GroupElem;
use nsshift::markov::{
    markov_measure, markov_shifted_cocycle, markov_tail_cocycle, primitivity, transition_bound,
    MarkovPair, MarkovSpec, PathCylinder,
};
use nsshift::measures::{Example33, Example33Params, MeasureFamily, ProbVector, Symbol};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ExperimentSpec, ShiftSpec, TailSpec};
use crate::row;
use crate::table::{join_f64, join_i64, Cell, Table};
use crate::CliError;

/// Slack for floating-point comparisons against exact bounds.
const SLACK: f64 = 1e-12;

/// A verdict row. Series checks carry their thresholds, pass/fail checks
/// their tolerance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub check: String,
    pub verdict: String,
    pub statistic: Option<f64>,
    pub thresholds: Option<Thresholds>,
    pub tolerance: Option<f64>,
}

impl Check {
    fn series(name: impl Into<String>, r: &SeriesReport) -> Self {
        Check {
            check: name.into(),
            verdict: r.verdict.as_str().into(),
            statistic: Some(r.last()),
            thresholds: Some(r.thresholds),
            tolerance: None,
        }
    }

    fn pass(name: impl Into<String>, ok: bool, statistic: f64, tolerance: Option<f64>) -> Self {
        Check {
            check: name.into(),
            verdict: if ok { "pass" } else { "fail" }.into(),
            statistic: Some(statistic),
            thresholds: None,
            tolerance,
        }
    }

    fn info(name: impl Into<String>, verdict: impl Into<String>, statistic: Option<f64>) -> Self {
        Check {
            check: name.into(),
            verdict: verdict.into(),
            statistic,
            thresholds: None,
            tolerance: None,
        }
    }

    pub fn passed(&self) -> bool {
        self.verdict != "fail"
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub tables: Vec<Table>,
    pub checks: Vec<Check>,
}

fn series_table(name: &'static str, r: &SeriesReport) -> Table {
    let mut t = Table::new(name, &["window", "partial_sum", "increment"]);
    for (i, (&w, &s)) in r.windows.iter().zip(&r.partial_sums).enumerate() {
        let inc = i.checked_sub(1).map(|j| r.increments[j]);
        t.push(row![w, s, inc]);
    }
    t
}

/// Independent generator for item `i` of an experiment seeded with `seed`.
fn item_rng(seed: u64, i: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(i as u64);
    rng
}

pub fn run_experiment(spec: &ExperimentSpec, defaults: Thresholds) -> Result<Outcome, CliError> {
    match spec {
        ExperimentSpec::Kakutani {
            family,
            shift,
            schedule,
            thresholds,
        } => {
            let fam = family.build()?;
            let g = GroupElem::new(shift.iter().copied());
            let r = kakutani_report(&fam, &g, &schedule.resolve(&fam)?, thresholds.unwrap_or(defaults))?;
            Ok(Outcome {
                tables: vec![series_table("series", &r)],
                checks: vec![Check::series("kakutani", &r)],
            })
        }
        ExperimentSpec::NonAtomicity {
            family,
            schedule,
            thresholds,
        } => {
            let fam = family.build()?;
            let r = non_atomicity_report(&fam, &schedule.resolve(&fam)?, thresholds.unwrap_or(defaults))?;
            Ok(Outcome {
                tables: vec![series_table("series", &r)],
                checks: vec![Check::series("non-atomicity", &r)],
            })
        }
        ExperimentSpec::Conservativity {
            family,
            xi,
            shifts,
            j_window,
            tail,
            thresholds,
        } => conservativity(family, *xi, shifts, *j_window, tail.as_ref(), thresholds.unwrap_or(defaults)),
        ExperimentSpec::ErgodicityCriteria {
            family,
            subsets,
            schedule,
            d_regularity: dreg,
            thresholds,
        } => {
            let fam = family.build()?;
            let schedule = schedule.resolve(&fam)?;
            let thresholds = thresholds.unwrap_or(defaults);
            let subsets: Vec<Vec<Symbol>> = match subsets {
                Some(s) => s.clone(),
                None => proper_subsets(fam.k()),
            };
            let mut table = Table::new("symmetric", &["subset", "window", "partial_sum", "increment"]);
            let mut checks = Vec::new();
            for b in &subsets {
                let r = symmetric_ergodicity(&fam, b, &schedule, thresholds)?;
                let label: Vec<i64> = b.iter().map(|&a| a as i64).collect();
                for (i, (&w, &s)) in r.windows.iter().zip(&r.partial_sums).enumerate() {
                    table.push(row![join_i64(&label), w, s, i.checked_sub(1).map(|j| r.increments[j])]);
                }
                checks.push(Check::series(format!("symmetric[{}]", join_i64(&label)), &r));
            }
            let mut tables = vec![table];
            if let Some(d) = dreg {
                let r = d_regularity(&fam, d.k_lo, d.k_hi, d.declared)?;
                let mut t = Table::new("d-regularity", &["k_lo", "k_hi", "estimate", "attained_at", "declared", "pass"]);
                t.push(row![d.k_lo, d.k_hi, r.estimate, r.attained_at, r.declared, r.pass]);
                tables.push(t);
                checks.push(match r.pass {
                    Some(ok) => Check::pass("d-regularity", ok, r.estimate, r.declared),
                    None => Check::info("d-regularity", "reported", Some(r.estimate)),
                });
            }
            Ok(Outcome { tables, checks })
        }
        ExperimentSpec::Semistationarity {
            family,
            window,
            schedule,
            thresholds,
        } => {
            let fam = family.build()?;
            let r = semistationarity_probe(&fam, *window, &schedule.resolve(&fam)?, thresholds.unwrap_or(defaults))?;
            let mut tails = Table::new("tails", &["side", "onset", "candidate"]);
            let mut series = Table::new("kakutani", &["side", "window", "partial_sum", "increment"]);
            let mut checks = Vec::new();
            for (side, probe) in [("right", &r.right), ("left", &r.left)] {
                tails.push(row![side, probe.onset, join_f64(&probe.candidate)]);
                let k = &probe.kakutani;
                for (i, (&w, &s)) in k.windows.iter().zip(&k.partial_sums).enumerate() {
                    series.push(row![side, w, s, i.checked_sub(1).map(|j| k.increments[j])]);
                }
                checks.push(Check::series(format!("{side}-tail-equivalence"), k));
            }
            checks.push(Check::info(
                "eventually-constant",
                if r.semistationary { "yes" } else { "no" },
                None,
            ));
            Ok(Outcome {
                tables: vec![tails, series],
                checks,
            })
        }
        ExperimentSpec::CocycleBounds {
            family,
            seed,
            instances,
            radius,
            max_shift,
            regular,
        } => {
            let fam = family.build()?;
            let mut out = uniform_bounds(&fam, *seed, *instances, *radius, *max_shift)?;
            if let Some(reg) = regular {
                let more = regular_bounds(&fam, *seed, *instances, *radius, reg)?;
                out.tables.extend(more.tables);
                out.checks.extend(more.checks);
            }
            Ok(out)
        }
        ExperimentSpec::RatioAverage {
            family,
            f,
            folner,
            seeds,
            target,
            tolerance,
            min_fraction,
        } => {
            let fam = family.build()?;
            let f = f.build(&fam)?;
            let folner = folner.build(fam.dim())?;
            let reports = seeds
                .par_iter()
                .map(|&s| ratio_average(&fam, &f, &PatternPoint::sampled(&fam, s), &folner))
                .collect::<Result<Vec<_>, _>>()?;
            let mut t = Table::new(
                "quotients",
                &["seed", "radius", "set_size", "quotient", "increment", "log_weight_sum"],
            );
            for (&s, r) in seeds.iter().zip(&reports) {
                for i in 0..r.radii.len() {
                    t.push(row![
                        s,
                        r.radii[i],
                        r.set_sizes[i],
                        r.quotients[i],
                        i.checked_sub(1).map(|j| r.increments[j]),
                        r.log_weight_sums[i]
                    ]);
                }
            }
            let finals: Vec<f64> = reports.iter().map(|r| *r.quotients.last().unwrap()).collect();
            let mean = finals.iter().sum::<f64>() / finals.len() as f64;
            let mut checks = vec![Check::info("mean-final-quotient", "reported", Some(mean))];
            if let (Some(target), Some(tol)) = (target, tolerance) {
                let within = finals.iter().filter(|q| (*q - target).abs() <= *tol).count();
                let frac = within as f64 / finals.len() as f64;
                checks.push(Check::pass("within-tolerance", frac >= *min_fraction, within as f64, Some(*tol)));
            }
            Ok(Outcome {
                tables: vec![t],
                checks,
            })
        }
        ExperimentSpec::WeakMixingProbe {
            family,
            pmp,
            f,
            h,
            folner,
            seeds,
        } => {
            let fam = family.build()?;
            let pmp = ProbVector::new(pmp.iter().copied())?;
            let f = f.build(&fam)?;
            let h = h.build(&MeasureFamily::stationary(pmp.clone(), fam.dim()))?;
            let folner = folner.build(fam.dim())?;
            let r = product_weak_mixing_probe(&fam, &pmp, &f, &h, &folner, seeds)?;
            let mut t = Table::new("quotients", &["seed", "radius", "quotient"]);
            for s in &r.starts {
                for (i, &q) in s.quotients.iter().enumerate() {
                    t.push(row![s.seed, r.radii[i], q]);
                }
            }
            Ok(Outcome {
                tables: vec![t],
                checks: vec![
                    Check::info("start-discrepancy", "reported", Some(r.max_discrepancy)),
                    Check::info("stationary-limit", if r.expected.is_some() { "known" } else { "unknown" }, r.expected),
                ],
            })
        }
        ExperimentSpec::Example33Verification {
            lambda,
            xi,
            a1,
            rho,
            levels,
            identity_max,
            margin_level,
            block_levels,
        } => {
            let ex = Example33::build(Example33Params {
                levels: *levels,
                ..Example33Params::new(*lambda, *xi, *a1, *rho)
            })?;
            example33_verification(&ex, *identity_max, *margin_level, block_levels)
        }
        ExperimentSpec::MarkovConsistency {
            markov,
            seed,
            cylinders,
            max_len,
            index_range,
        } => {
            let spec = MarkovSpec::try_from(markov.clone())?;
            markov_consistency(&spec, *seed, *cylinders, *max_len, *index_range)
        }
        ExperimentSpec::MarkovCocycle {
            markov,
            seed,
            pairs,
            max_len,
            index_range,
            max_shift,
        } => {
            let spec = MarkovSpec::try_from(markov.clone())?;
            markov_cocycle(&spec, *seed, *pairs, *max_len, *index_range, *max_shift)
        }
    }
}

fn proper_subsets(k: usize) -> Vec<Vec<Symbol>> {
    (1u32..(1 << k) - 1)
        .map(|bits| (0..k as Symbol).filter(|&a| bits >> a & 1 == 1).collect())
        .collect()
}

fn conservativity(
    family: &nsshift::measures::FamilySpec,
    xi: Option<f64>,
    shifts: &ShiftSpec,
    j_window: u64,
    tail: Option<&TailSpec>,
    thresholds: Thresholds,
) -> Result<Outcome, CliError> {
    let fam = family.build()?;
    let ex = family.example33().transpose()?;
    let xi = xi.or(ex.as_ref().map(|e| e.params().xi)).unwrap();
    let selection = match shifts {
        ShiftSpec::Window { schedule } => ShiftSelection::Window {
            schedule: schedule.resolve(&fam)?,
        },
        ShiftSpec::Points { shifts } => ShiftSelection::Points {
            shifts: shifts.clone(),
        },
        ShiftSpec::BlockShifts { levels } => {
            let ex = ex.as_ref().unwrap();
            ShiftSelection::Points {
                shifts: levels
                    .iter()
                    .flat_map(|&l| nsshift::diagnostics::example33_block_shifts(ex, l..=l))
                    .collect(),
            }
        }
    };
    let inner = match (tail, &ex) {
        (Some(TailSpec::Bound { value }), _) => InnerTail::Bound(*value),
        (Some(TailSpec::Segments), _) => InnerTail::Segments,
        (Some(TailSpec::Example33), Some(e)) | (None, Some(e)) => InnerTail::Example33(e),
        _ => InnerTail::Segments,
    };
    let r = conservativity_series(&fam, xi, &selection, j_window, inner, thresholds)?;
    let mut terms = Table::new("terms", &["n", "inner_sum", "tail_bound", "term"]);
    for t in &r.terms {
        terms.push(row![t.n, t.inner_sum, t.tail_bound, t.term]);
    }
    Ok(Outcome {
        tables: vec![terms, series_table("series", &r.series)],
        checks: vec![
            Check::series("conservativity", &r.series),
            Check::pass(
                "inner-tail-certified",
                r.max_tail_bound < INNER_TAIL_TOLERANCE,
                r.max_tail_bound,
                Some(INNER_TAIL_TOLERANCE),
            ),
        ],
    })
}

fn random_elem(rng: &mut ChaCha8Rng, dim: usize, r: i64) -> GroupElem {
    GroupElem::new((0..dim).map(|_| rng.gen_range(-r..=r)).collect::<Vec<_>>())
}

/// `|log Delta(T_g x, T_g y)| <= #F log(1/delta)` on random pairs.
fn uniform_bounds(
    fam: &MeasureFamily,
    seed: u64,
    instances: usize,
    radius: i64,
    max_shift: i64,
) -> Result<Outcome, CliError> {
    let delta = fam.lower_bound().unwrap();
    let k = fam.k();
    let rows = (0..instances)
        .into_par_iter()
        .map(|i| {
            let mut rng = item_rng(seed, i);
            let x = PatternPoint::sampled(fam, rng.gen());
            let m = rng.gen_range(1..=4usize);
            let mut diff = std::collections::BTreeMap::new();
            for _ in 0..m {
                let h = random_elem(&mut rng, fam.dim(), radius);
                let cur = x.symbol_at(&h) as usize;
                let b = (cur + rng.gen_range(1..k)) % k;
                diff.insert(h, b as Symbol);
            }
            let pair = TailPair::new(x, diff)?;
            let g = random_elem(&mut rng, fam.dim(), max_shift);
            let v = shifted_tail_cocycle(fam, &pair, &g)?.log_value;
            let bound = uniform_bound_log(delta, pair.len());
            Ok((g, pair.len(), v, bound))
        })
        .collect::<Result<Vec<_>, nsshift::Error>>()?;
    let mut t = Table::new("uniform", &["instance", "g", "support_size", "log_value", "log_bound", "pass"]);
    let mut violations = 0usize;
    for (i, (g, n, v, b)) in rows.into_iter().enumerate() {
        let ok = v.abs() <= b + SLACK;
        violations += !ok as usize;
        t.push(row![i, join_i64(g.coords()), n, v, b, ok]);
    }
    Ok(Outcome {
        tables: vec![t],
        checks: vec![
            Check::info("delta", "reported", Some(delta)),
            Check::pass("uniform-bound", violations == 0, violations as f64, Some(SLACK)),
        ],
    })
}

fn random_permutation(rng: &mut ChaCha8Rng, domain: &[i64]) -> Permutation {
    let mut image = domain.to_vec();
    for i in (1..image.len()).rev() {
        image.swap(i, rng.gen_range(0..=i));
    }
    Permutation::new(domain.iter().copied().zip(image).collect()).expect("a bijection of the domain")
}

/// `|log Delta(T^n x, T^n y)| <= e log D` for `y` a permutation of `x`,
/// at shifts `n` below the negative-side threshold.
fn regular_bounds(
    fam: &MeasureFamily,
    seed: u64,
    instances: usize,
    radius: i64,
    reg: &crate::config::RegularSpec,
) -> Result<Outcome, CliError> {
    let dr = d_regularity(fam, reg.k_lo, -1, Some(reg.d))?;
    let d = dr.estimate;
    let rows = (0..instances)
        .into_par_iter()
        .map(|i| {
            let mut rng = item_rng(seed ^ 0x9E37_79B9_7F4A_7C15, i);
            let m = rng.gen_range(2..=reg.max_domain);
            let domain: Vec<i64> = if reg.spread {
                let mut pts = std::collections::BTreeSet::new();
                while pts.len() < m {
                    pts.insert(rng.gen_range(-radius..=radius));
                }
                pts.into_iter().collect()
            } else {
                let lo = rng.gen_range(-radius..=radius);
                (lo..lo + m as i64).collect()
            };
            let sigma = random_permutation(&mut rng, &domain);
            let x = PatternPoint::sampled(fam, rng.gen());
            let pair = permuted_pair(&x, &sigma)?;
            let top = negative_side_threshold(domain.iter().copied()).unwrap();
            // every index k + n and sigma^-1(k) + n must stay in [k_lo, 0]
            let bottom = (top - reg.n_span).max(reg.k_lo - domain[0]);
            let n = if bottom <= top { rng.gen_range(bottom..=top) } else { top };
            let v = symmetric_shifted_cocycle(fam, &pair, &sigma, n)?.log_value;
            let bound = regular_bound_log(d, &sigma, reg.spread);
            let in_range = bottom <= top;
            Ok((m, n, v, bound, in_range))
        })
        .collect::<Result<Vec<_>, nsshift::Error>>()?;
    let mut t = Table::new("regular", &["instance", "domain_size", "n", "log_value", "log_bound", "pass"]);
    let mut violations = 0usize;
    for (i, (m, n, v, b, in_range)) in rows.into_iter().enumerate() {
        if !in_range {
            return Err(CliError::invalid(
                "regular",
                format!("k_lo = {} leaves no admissible shift for instance {i}", reg.k_lo),
            ));
        }
        let ok = v.abs() <= b + SLACK;
        violations += !ok as usize;
        t.push(row![i, m, n, v, b, ok]);
    }
    let mut dt = Table::new("d-regularity", &["k_lo", "k_hi", "estimate", "attained_at", "declared", "pass"]);
    dt.push(row![reg.k_lo, -1i64, dr.estimate, dr.attained_at, dr.declared, dr.pass]);
    let bound_name = if reg.spread { "displacement-bound" } else { "square-bound" };
    Ok(Outcome {
        tables: vec![t, dt],
        checks: vec![
            Check::pass("d-regularity", dr.pass.unwrap_or(false), dr.estimate, Some(reg.d)),
            Check::pass(bound_name, violations == 0, violations as f64, Some(SLACK)),
        ],
    })
}

fn example33_verification(
    ex: &Example33,
    identity_max: usize,
    margin_level: usize,
    block_levels: &[usize],
) -> Result<Outcome, CliError> {
    let mut checks = Vec::new();
    let (amp_ok, sum_sq) = ex.condition_amplitudes();
    checks.push(Check::pass("(i) amplitudes", amp_ok, sum_sq, None));
    checks.push(Check::pass("(ii) growth", ex.condition_growth(), ex.a(ex.levels()), None));
    let err = ex.partial_sum_identity_error(identity_max);
    checks.push(Check::pass("(iii) partial-sum identity", err <= 1e-12, err, Some(1e-12)));
    let margin = ex.margin_check(ex.a_index(margin_level));
    checks.push(Check::pass(
        "(I) margins",
        margin.pass,
        margin.min_p0.min(1.0 - margin.max_p0),
        None,
    ));
    let (series, closed) = ex.unit_shift_energy()?;
    checks.push(Check::pass(
        "(II) unit-shift energy",
        (series - closed).abs() <= 1e-9,
        (series - closed).abs(),
        Some(1e-9),
    ));

    let xi = ex.params().xi;
    let big_j = ex.family_levels();
    let rows = block_levels
        .par_iter()
        .map(|&l| Ok((l, ex.block_shift_energy(l)?)))
        .collect::<Result<Vec<_>, nsshift::Error>>()?;
    let mut t = Table::new(
        "block-shifts",
        &["l", "shift", "energy", "closed_form", "stated_form", "log_l_over_xi", "ratio"],
    );
    let (mut closed_ok, mut stated_ok, mut ratio_ok) = (true, true, true);
    let (mut closed_err, mut stated_err, mut worst_ratio) = (0.0f64, 0.0f64, 1.0f64);
    for (l, energy) in rows {
        let closed = ex.block_shift_closed_form(l);
        let near: f64 = (1..=l).map(|j| 4.0 * ex.alpha(j).powi(2) * ex.a(j)).sum();
        let far: f64 = ((l + 1)..=big_j).map(|j| ex.alpha(j).powi(2)).sum();
        let stated = near + 4.0 * ex.a(l) * far;
        let target = (l as f64).ln() / xi;
        let ratio = energy / target;
        closed_err = closed_err.max((energy - closed).abs());
        stated_err = stated_err.max((energy - stated).abs());
        closed_ok &= (energy - closed).abs() <= SLACK;
        stated_ok &= (energy - stated).abs() <= SLACK;
        ratio_ok &= (0.8..=1.2).contains(&ratio);
        if (ratio - 1.0).abs() > (worst_ratio - 1.0).abs() {
            worst_ratio = ratio;
        }
        t.push(row![l, 4 * ex.a_index(l), energy, closed, stated, target, ratio]);
    }
    checks.push(Check::pass("block-shift edge count 16", closed_ok, closed_err, Some(SLACK)));
    checks.push(Check::pass("block-shift edge count 4", stated_ok, stated_err, Some(SLACK)));
    checks.push(Check::pass("block-shift ratio to log(l)/xi", ratio_ok, worst_ratio, None));
    Ok(Outcome {
        tables: vec![t],
        checks,
    })
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

fn markov_common_checks(spec: &MarkovSpec, lo: i64, hi: i64) -> Result<Vec<Check>, CliError> {
    let prim = primitivity(spec.structure());
    let tb = transition_bound(spec, lo, hi)?;
    Ok(vec![
        Check::info(
            "primitivity",
            if prim.is_some() { "primitive" } else { "not-primitive" },
            prim.map(|n| n as f64),
        ),
        Check::info(
            "transition-bound",
            if tb.decaying { "decaying" } else { "bounded" },
            Some(tb.delta),
        ),
    ])
}

fn markov_consistency(
    spec: &MarkovSpec,
    seed: u64,
    cylinders: usize,
    max_len: usize,
    index_range: i64,
) -> Result<Outcome, CliError> {
    let s = spec.states() as Symbol;
    let rows = (0..cylinders)
        .into_par_iter()
        .map(|i| {
            let mut rng = item_rng(seed, i);
            let start = rng.gen_range(-index_range..=index_range);
            let len = rng.gen_range(1..=max_len);
            let cyl = PathCylinder::new(start, random_path(&mut rng, spec, len))?;
            let base = markov_measure(spec, &cyl)?;
            let last = *cyl.symbols.last().unwrap();
            let first = cyl.symbols[0];
            let mut right = 0.0;
            let mut left = 0.0;
            for b in 0..s {
                if spec.allowed(last, b) {
                    right += markov_measure(spec, &cyl.extended_right(b))?;
                }
                if spec.allowed(b, first) {
                    left += markov_measure(spec, &cyl.extended_left(b))?;
                }
            }
            Ok((start, len, base, (right - base).abs(), (left - base).abs()))
        })
        .collect::<Result<Vec<_>, nsshift::Error>>()?;
    let mut t = Table::new(
        "cylinders",
        &["instance", "start", "length", "measure", "right_error", "left_error", "pass"],
    );
    let mut worst = 0.0f64;
    let mut failures = 0usize;
    for (i, (start, len, m, re, le)) in rows.into_iter().enumerate() {
        let ok = re <= SLACK && le <= SLACK && (0.0..=1.0).contains(&m);
        failures += !ok as usize;
        worst = worst.max(re).max(le);
        t.push(row![i, start, len, m, re, le, ok]);
    }
    let mut checks = vec![Check::pass("kolmogorov", failures == 0, worst, Some(SLACK))];
    checks.extend(markov_common_checks(spec, -index_range, index_range + max_len as i64)?);
    Ok(Outcome {
        tables: vec![t],
        checks,
    })
}

fn markov_cocycle(
    spec: &MarkovSpec,
    seed: u64,
    pairs: usize,
    max_len: usize,
    index_range: i64,
    max_shift: i64,
) -> Result<Outcome, CliError> {
    let rows = (0..pairs)
        .into_par_iter()
        .map(|i| {
            let mut rng = item_rng(seed, i);
            let start = rng.gen_range(-index_range..=index_range);
            let len = rng.gen_range(2..=max_len);
            let x = random_path(&mut rng, spec, len);
            let y = (0..1000)
                .map(|_| random_path(&mut rng, spec, len))
                .find(|y| y[0] == x[0] && y[len - 1] == x[len - 1])
                .unwrap_or_else(|| x.clone());
            let pair = MarkovPair::new(start, x, y)?;
            let n = rng.gen_range(-max_shift..=max_shift);
            let v = markov_shifted_cocycle(spec, &pair, n)?.log_value;
            let back = markov_tail_cocycle(spec, &pair.translate(n).reversed())?.log_value;
            let lo = start + n;
            let delta = transition_bound(spec, lo, lo + len as i64)?.delta;
            let bound = 2.0 * pair.differing() as f64 * -delta.ln();
            Ok((start, len, n, pair.differing(), v, bound, (v + back).abs()))
        })
        .collect::<Result<Vec<_>, nsshift::Error>>()?;
    let mut t = Table::new(
        "pairs",
        &["instance", "start", "length", "shift", "differing", "log_value", "log_bound", "inversion_error", "pass"],
    );
    let mut violations = 0usize;
    let mut inv_worst = 0.0f64;
    for (i, (start, len, n, m, v, b, inv)) in rows.into_iter().enumerate() {
        let ok = v.abs() <= b + SLACK && inv <= SLACK;
        violations += !ok as usize;
        inv_worst = inv_worst.max(inv);
        t.push(row![i, start, len, n, m, v, b, inv, ok]);
    }
    let mut checks = vec![
        Check::pass("delta-bound", violations == 0, violations as f64, Some(SLACK)),
        Check::pass("inversion", inv_worst <= SLACK, inv_worst, Some(SLACK)),
    ];
    checks.extend(markov_common_checks(spec, -index_range - max_shift, index_range + max_shift + max_len as i64)?);
    Ok(Outcome {
        tables: vec![t],
        checks,
    })
}

/// Cells for the verdict table: check, verdict, statistic, thresholds,
/// tolerance.
pub fn check_cells(c: &Check) -> Vec<Cell> {
    let t = c.thresholds;
    row![
        c.check.as_str(),
        c.verdict.as_str(),
        c.statistic,
        t.map(|t| t.diverge_fraction),
        t.map(|t| t.converge_increment),
        t.map(|t| t.converge_ratio),
        c.tolerance
    ]
}
