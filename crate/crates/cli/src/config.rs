//! Experiment configs: a TOML file with a `name`, optional default
//! `thresholds`, and one `[[experiment]]` table per experiment.
//!
//! ```toml
//! name = "smoke"
//!
//! [[experiment]]
//! id = "stationary-kakutani"
//! kind = "kakutani"
//! family = { kind = "stationary", p = [0.5, 0.5] }
//! shift = [1]
//! schedule = { kind = "doubling", max = 1024 }
//! ```

use std::collections::BTreeSet;
use std::path::Path;

use nsshift::diagnostics::{Schedule, Thresholds};
use nsshift::group::{FolnerSequence, GroupElem, Lattice};
use nsshift::markov::{MarkovConfig, MarkovSpec};
use nsshift::measures::{Example33Params, FamilySpec, MeasureFamily, ProbVector};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    /// Verdict thresholds for experiments that do not set their own.
    #[serde(default)]
    pub thresholds: Thresholds,
    #[serde(rename = "experiment")]
    pub experiments: Vec<Experiment>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "toml::Table", into = "toml::Table")]
pub struct Experiment {
    pub id: String,
    pub spec: ExperimentSpec,
}

impl TryFrom<toml::Table> for Experiment {
    type Error = String;

    fn try_from(mut t: toml::Table) -> Result<Self, String> {
        let id = match t.remove("id") {
            Some(toml::Value::String(s)) => s,
            Some(_) => return Err("experiment `id` must be a string".into()),
            None => return Err("experiment is missing `id`".into()),
        };
        let spec = ExperimentSpec::deserialize(toml::Value::Table(t))
            .map_err(|e| format!("experiment `{id}`: {}", e.message()))?;
        Ok(Experiment { id, spec })
    }
}

impl From<Experiment> for toml::Table {
    fn from(e: Experiment) -> Self {
        let mut t = toml::Table::new();
        t.insert("id".into(), toml::Value::String(e.id));
        if let Ok(toml::Value::Table(rest)) = toml::Value::try_from(&e.spec) {
            t.extend(rest);
        }
        t
    }
}

/// Window schedule; `levels` follows the blocks of a block family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ScheduleSpec {
    Doubling { max: u64 },
    Explicit { windows: Vec<u64> },
    Levels,
}

impl ScheduleSpec {
    pub fn resolve(&self, fam: &MeasureFamily) -> Result<Schedule, CliError> {
        let s = match self {
            ScheduleSpec::Doubling { max } => Schedule::Doubling { max: *max },
            ScheduleSpec::Explicit { windows } => Schedule::Explicit {
                windows: windows.clone(),
            },
            ScheduleSpec::Levels => Schedule::levels(fam.block_family().ok_or_else(|| {
                CliError::invalid("schedule", "`levels` needs a blocks or example33 family")
            })?),
        };
        s.windows()?;
        Ok(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TailSpec {
    Segments,
    Example33,
    Bound { value: f64 },
}

/// Følner boxes `[-r, r]^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FolnerSpec {
    Doubling { max: u64 },
    Radii { radii: Vec<u64> },
}

impl FolnerSpec {
    pub fn build(&self, dim: usize) -> Result<FolnerSequence, CliError> {
        let model = Lattice::new(dim)?;
        Ok(match self {
            FolnerSpec::Doubling { max } => FolnerSequence::doubling(model, *max)?,
            FolnerSpec::Radii { radii } => FolnerSequence::new(model, radii.clone())?,
        })
    }
}

/// Cylinder functions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FunctionSpec {
    Constant { value: f64 },
    /// `1{x_at = symbol}`.
    Indicator { at: Vec<i64>, symbol: u8 },
    /// Values indexed by `x_{c_0} + k x_{c_1} + ...`.
    Table { coords: Vec<Vec<i64>>, values: Vec<f64> },
}

impl FunctionSpec {
    pub fn build(&self, fam: &MeasureFamily) -> Result<nsshift::engine::CylinderFunction, CliError> {
        use nsshift::engine::CylinderFunction;
        let alphabet = fam.alphabet();
        let check_dim = |c: &[i64]| {
            if c.len() != fam.dim() {
                Err(CliError::invalid(
                    "f",
                    format!("coordinate {c:?} does not match dimension {}", fam.dim()),
                ))
            } else {
                Ok(GroupElem::new(c.iter().copied()))
            }
        };
        Ok(match self {
            FunctionSpec::Constant { value } => CylinderFunction::constant(*value, alphabet),
            FunctionSpec::Indicator { at, symbol } => {
                CylinderFunction::indicator(check_dim(at)?, *symbol, alphabet)?
            }
            FunctionSpec::Table { coords, values } => {
                let coords = coords.iter().map(|c| check_dim(c)).collect::<Result<_, _>>()?;
                CylinderFunction::new(coords, alphabet, values.clone())?
            }
        })
    }
}

/// The one-step ratio check for the symmetric cocycle bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegularSpec {
    /// Declared `D`; must exceed the measured one-step ratio.
    pub d: f64,
    /// Ratios are measured over `k_lo <= k <= -1`.
    pub k_lo: i64,
    /// Largest `#J` of the random permutation domains.
    pub max_domain: usize,
    /// Shifts `n` range over `[threshold - n_span, threshold]`.
    pub n_span: i64,
    /// Spread domains use the displacement exponent instead of `(#J)^2`.
    #[serde(default)]
    pub spread: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DRegularitySpec {
    pub k_lo: i64,
    pub k_hi: i64,
    #[serde(default)]
    pub declared: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ExperimentSpec {
    Kakutani {
        family: FamilySpec,
        shift: Vec<i64>,
        schedule: ScheduleSpec,
        #[serde(default)]
        thresholds: Option<Thresholds>,
    },
    NonAtomicity {
        family: FamilySpec,
        schedule: ScheduleSpec,
        #[serde(default)]
        thresholds: Option<Thresholds>,
    },
    Conservativity {
        family: FamilySpec,
        /// Defaults to the family's own `xi` for example33 families.
        #[serde(default)]
        xi: Option<f64>,
        shifts: ShiftSpec,
        j_window: u64,
        #[serde(default)]
        tail: Option<TailSpec>,
        #[serde(default)]
        thresholds: Option<Thresholds>,
    },
    ErgodicityCriteria {
        family: FamilySpec,
        /// Subsets `B` of the alphabet; all nonempty proper subsets if absent.
        #[serde(default)]
        subsets: Option<Vec<Vec<u8>>>,
        schedule: ScheduleSpec,
        #[serde(default)]
        d_regularity: Option<DRegularitySpec>,
        #[serde(default)]
        thresholds: Option<Thresholds>,
    },
    Semistationarity {
        family: FamilySpec,
        window: u64,
        schedule: ScheduleSpec,
        #[serde(default)]
        thresholds: Option<Thresholds>,
    },
    CocycleBounds {
        family: FamilySpec,
        seed: u64,
        instances: usize,
        /// Pairs differ inside `[-radius, radius]^d`.
        radius: i64,
        /// Shifts `g` range over `[-max_shift, max_shift]^d`.
        max_shift: i64,
        #[serde(default)]
        regular: Option<RegularSpec>,
    },
    RatioAverage {
        family: FamilySpec,
        f: FunctionSpec,
        folner: FolnerSpec,
        seeds: Vec<u64>,
        /// Reference value and tolerance for the final quotients.
        #[serde(default)]
        target: Option<f64>,
        #[serde(default)]
        tolerance: Option<f64>,
        /// Fraction of seeds that must land within `tolerance` of `target`.
        #[serde(default = "one")]
        min_fraction: f64,
    },
    WeakMixingProbe {
        family: FamilySpec,
        pmp: Vec<f64>,
        f: FunctionSpec,
        h: FunctionSpec,
        folner: FolnerSpec,
        seeds: Vec<u64>,
    },
    Example33Verification {
        lambda: f64,
        xi: f64,
        a1: u64,
        rho: f64,
        #[serde(default = "default_levels")]
        levels: usize,
        /// `n` range for the partial-sum identity.
        #[serde(default = "default_levels")]
        identity_max: usize,
        /// Level `l` whose `A_l` bounds the margin check.
        #[serde(default = "default_margin_level")]
        margin_level: usize,
        /// Levels for the shift-by-`4 A_l` energies.
        #[serde(default = "default_block_levels")]
        block_levels: Vec<usize>,
    },
    MarkovConsistency {
        markov: MarkovConfig,
        seed: u64,
        cylinders: usize,
        max_len: usize,
        /// Cylinder starts range over `[-index_range, index_range]`.
        index_range: i64,
    },
    MarkovCocycle {
        markov: MarkovConfig,
        seed: u64,
        pairs: usize,
        max_len: usize,
        index_range: i64,
        max_shift: i64,
    },
}

fn one() -> f64 {
    1.0
}

fn default_levels() -> usize {
    200
}

fn default_margin_level() -> usize {
    6
}

fn default_block_levels() -> Vec<usize> {
    vec![3, 4, 5, 6]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ShiftSpec {
    Window { schedule: ScheduleSpec },
    Points { shifts: Vec<i64> },
    /// `4 A_l` for the listed levels of an example33 family.
    BlockShifts { levels: Vec<usize> },
}

impl ExperimentSpec {
    pub fn kind_name(&self) -> &'static str {
        match self {
            ExperimentSpec::Kakutani { .. } => "kakutani",
            ExperimentSpec::NonAtomicity { .. } => "non-atomicity",
            ExperimentSpec::Conservativity { .. } => "conservativity",
            ExperimentSpec::ErgodicityCriteria { .. } => "ergodicity-criteria",
            ExperimentSpec::Semistationarity { .. } => "semistationarity",
            ExperimentSpec::CocycleBounds { .. } => "cocycle-bounds",
            ExperimentSpec::RatioAverage { .. } => "ratio-average",
            ExperimentSpec::WeakMixingProbe { .. } => "weak-mixing-probe",
            ExperimentSpec::Example33Verification { .. } => "example33-verification",
            ExperimentSpec::MarkovConsistency { .. } => "markov-consistency",
            ExperimentSpec::MarkovCocycle { .. } => "markov-cocycle",
        }
    }

    pub fn family(&self) -> Option<&FamilySpec> {
        match self {
            ExperimentSpec::Kakutani { family, .. }
            | ExperimentSpec::NonAtomicity { family, .. }
            | ExperimentSpec::Conservativity { family, .. }
            | ExperimentSpec::ErgodicityCriteria { family, .. }
            | ExperimentSpec::Semistationarity { family, .. }
            | ExperimentSpec::CocycleBounds { family, .. }
            | ExperimentSpec::RatioAverage { family, .. }
            | ExperimentSpec::WeakMixingProbe { family, .. } => Some(family),
            _ => None,
        }
    }

    /// Replace every seed: a single seed becomes `s`, a list of `m` seeds
    /// becomes `s, s+1, ..., s+m-1`.
    pub fn override_seeds(&mut self, s: u64) {
        match self {
            ExperimentSpec::CocycleBounds { seed, .. }
            | ExperimentSpec::MarkovConsistency { seed, .. }
            | ExperimentSpec::MarkovCocycle { seed, .. } => *seed = s,
            ExperimentSpec::RatioAverage { seeds, .. }
            | ExperimentSpec::WeakMixingProbe { seeds, .. } => {
                for (i, v) in seeds.iter_mut().enumerate() {
                    *v = s.wrapping_add(i as u64);
                }
            }
            _ => {}
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Parse(e.message().to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable in TOML")
    }

    /// Check every experiment's parameters without computing anything.
    pub fn validate(&self) -> Result<(), CliError> {
        if self.experiments.is_empty() {
            return Err(CliError::invalid("experiment", "config has no experiments"));
        }
        let mut seen = BTreeSet::new();
        for e in &self.experiments {
            if e.id.is_empty()
                || !e
                    .id
                    .chars()
                    .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
            {
                return Err(CliError::invalid(
                    "id",
                    format!("`{}` must be nonempty and use only [A-Za-z0-9_-]", e.id),
                ));
            }
            if !seen.insert(e.id.as_str()) {
                return Err(CliError::invalid("id", format!("duplicate experiment id `{}`", e.id)));
            }
            validate_experiment(&e.spec).map_err(|err| err.within(&e.id))?;
        }
        Ok(())
    }
}

fn positive(name: &'static str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::invalid(name, format!("{v} must be positive")))
    }
}

fn nonzero(name: &'static str, v: usize) -> Result<(), CliError> {
    if v == 0 {
        Err(CliError::invalid(name, "must be at least 1"))
    } else {
        Ok(())
    }
}

fn validate_experiment(spec: &ExperimentSpec) -> Result<(), CliError> {
    let fam = spec.family().map(FamilySpec::build).transpose()?;
    match spec {
        ExperimentSpec::Kakutani { shift, schedule, .. } => {
            let fam = fam.unwrap();
            if shift.len() != fam.dim() {
                return Err(CliError::invalid("shift", "dimension differs from the family's"));
            }
            schedule.resolve(&fam)?;
        }
        ExperimentSpec::NonAtomicity { schedule, .. } => {
            schedule.resolve(fam.as_ref().unwrap())?;
        }
        ExperimentSpec::Conservativity {
            family,
            xi,
            shifts,
            tail,
            ..
        } => {
            let fam = fam.unwrap();
            if fam.k() != 2 {
                return Err(CliError::invalid("family", "conservativity needs a binary family"));
            }
            match (xi, family.example33()) {
                (Some(x), _) => positive("xi", *x)?,
                (None, Some(_)) => {}
                (None, None) => return Err(CliError::invalid("xi", "required for this family")),
            }
            match shifts {
                ShiftSpec::Window { schedule } => {
                    schedule.resolve(&fam)?;
                }
                ShiftSpec::Points { shifts } if shifts.is_empty() => {
                    return Err(CliError::invalid("shifts", "need at least one shift"))
                }
                ShiftSpec::BlockShifts { .. } if family.example33().is_none() => {
                    return Err(CliError::invalid("shifts", "block-shifts needs an example33 family"))
                }
                _ => {}
            }
            match tail {
                Some(TailSpec::Example33) if family.example33().is_none() => {
                    return Err(CliError::invalid("tail", "example33 tail needs an example33 family"))
                }
                Some(TailSpec::Bound { value }) if !(*value >= 0.0) => {
                    return Err(CliError::invalid("tail", "bound must be nonnegative"))
                }
                _ => {}
            }
        }
        ExperimentSpec::ErgodicityCriteria {
            subsets,
            schedule,
            d_regularity,
            ..
        } => {
            let fam = fam.unwrap();
            schedule.resolve(&fam)?;
            for b in subsets.iter().flatten() {
                if b.is_empty() || b.len() >= fam.k() || b.iter().any(|&a| a as usize >= fam.k()) {
                    return Err(CliError::invalid("subsets", format!("{b:?} is not a proper nonempty subset")));
                }
            }
            if let Some(d) = d_regularity {
                if fam.dim() != 1 || d.k_hi >= 0 || d.k_lo > d.k_hi {
                    return Err(CliError::invalid("d_regularity", "need a 1-D family and k_lo <= k_hi < 0"));
                }
            }
        }
        ExperimentSpec::Semistationarity { window, schedule, .. } => {
            let fam = fam.unwrap();
            if fam.dim() != 1 {
                return Err(CliError::invalid("family", "semistationarity needs a 1-D family"));
            }
            if *window == 0 {
                return Err(CliError::invalid("window", "must be at least 1"));
            }
            schedule.resolve(&fam)?;
        }
        ExperimentSpec::CocycleBounds {
            instances,
            radius,
            max_shift,
            regular,
            ..
        } => {
            let fam = fam.unwrap();
            nonzero("instances", *instances)?;
            if *radius < 0 || *max_shift < 0 {
                return Err(CliError::invalid("radius", "radius and max_shift must be nonnegative"));
            }
            if fam.lower_bound().is_none() {
                return Err(CliError::invalid("family", "needs a certified lower bound delta"));
            }
            if let Some(r) = regular {
                if fam.dim() != 1 {
                    return Err(CliError::invalid("regular", "needs a 1-D family"));
                }
                if !(r.d > 1.0) || r.k_lo >= 0 || r.max_domain < 2 || r.n_span < 0 {
                    return Err(CliError::invalid(
                        "regular",
                        "need d > 1, k_lo < 0, max_domain >= 2, n_span >= 0",
                    ));
                }
            }
        }
        ExperimentSpec::RatioAverage {
            f,
            folner,
            seeds,
            target,
            tolerance,
            min_fraction,
            ..
        } => {
            if !(0.0..=1.0).contains(min_fraction) {
                return Err(CliError::invalid("min_fraction", "must lie in [0, 1]"));
            }
            let fam = fam.unwrap();
            f.build(&fam)?;
            folner.build(fam.dim())?;
            nonzero("seeds", seeds.len())?;
            if target.is_some() != tolerance.is_some() {
                return Err(CliError::invalid("target", "target and tolerance go together"));
            }
            if let Some(t) = tolerance {
                positive("tolerance", *t)?;
            }
        }
        ExperimentSpec::WeakMixingProbe {
            pmp,
            f,
            h,
            folner,
            seeds,
            ..
        } => {
            let fam = fam.unwrap();
            let pmp = ProbVector::new(pmp.iter().copied())?;
            f.build(&fam)?;
            h.build(&MeasureFamily::stationary(pmp, fam.dim()))?;
            folner.build(fam.dim())?;
            nonzero("seeds", seeds.len())?;
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
            let ex = nsshift::measures::Example33::build(Example33Params {
                levels: *levels,
                ..Example33Params::new(*lambda, *xi, *a1, *rho)
            })?;
            if *identity_max > *levels {
                return Err(CliError::invalid("identity_max", "exceeds levels"));
            }
            if *margin_level == 0 || *margin_level > ex.family_levels() {
                return Err(CliError::invalid("margin_level", "outside the realized levels"));
            }
            if let Some(&l) = block_levels
                .iter()
                .find(|&&l| l < 2 || l > ex.family_levels())
            {
                return Err(CliError::invalid(
                    "block_levels",
                    format!("level {l} outside 2..={}", ex.family_levels()),
                ));
            }
        }
        ExperimentSpec::MarkovConsistency {
            markov,
            cylinders,
            max_len,
            index_range,
            ..
        } => {
            MarkovSpec::try_from(markov.clone())?;
            nonzero("cylinders", *cylinders)?;
            nonzero("max_len", *max_len)?;
            if *index_range < 0 {
                return Err(CliError::invalid("index_range", "must be nonnegative"));
            }
        }
        ExperimentSpec::MarkovCocycle {
            markov,
            pairs,
            max_len,
            index_range,
            max_shift,
            ..
        } => {
            MarkovSpec::try_from(markov.clone())?;
            nonzero("pairs", *pairs)?;
            if *max_len < 2 {
                return Err(CliError::invalid("max_len", "pairs need stretches of length >= 2"));
            }
            if *index_range < 0 || *max_shift < 0 {
                return Err(CliError::invalid("index_range", "ranges must be nonnegative"));
            }
        }
    }
    Ok(())
}
