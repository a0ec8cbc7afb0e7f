//! Experiment runner: reads a declarative TOML config, runs every
//! experiment through the `nsshift` library and writes one CSV per table
//! plus a JSON report.
//!
//! Output layout in the output directory:
//!
//! * `<id>.<table>.csv` for every table of every experiment,
//! * `verdicts.csv` with one row per check of every experiment,
//! * `report.json` with the config echo, library version, timestamp, wall
//!   time and the verdicts.
//!
//! CSV bodies depend only on the config and the library version; the
//! timestamp and wall time live in the JSON report only.

use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

pub mod config;
pub mod experiments;
pub mod table;

pub use config::{Experiment, ExperimentConfig, ExperimentSpec};
pub use experiments::{Check, Outcome};

use experiments::{check_cells, run_experiment};
use table::Table;

/// Environment variable naming the default output directory.
pub const OUT_ENV: &str = "NSSHIFT_OUT";
pub const DEFAULT_OUT: &str = "nsshift-out";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot parse config: {0}")]
    Parse(String),

    #[error("invalid parameter `{name}`: {reason}")]
    Invalid { name: String, reason: String },

    #[error(transparent)]
    Core(#[from] nsshift::Error),

    #[error("experiment `{id}`: {source}")]
    In { id: String, source: Box<CliError> },

    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn invalid(name: impl Into<String>, reason: impl Into<String>) -> Self {
        CliError::Invalid {
            name: name.into(),
            reason: reason.into(),
        }
    }

    pub fn within(self, id: &str) -> Self {
        CliError::In {
            id: id.to_string(),
            source: Box::new(self),
        }
    }

    fn root(&self) -> &CliError {
        match self {
            CliError::In { source, .. } => source.root(),
            e => e,
        }
    }

    /// Machine-readable category.
    pub fn kind(&self) -> &'static str {
        match self.root() {
            CliError::Parse(_) => "parse",
            CliError::Invalid { .. } => "invalid-parameter",
            CliError::Core(nsshift::Error::RefusedTruncation(_)) => "refused-truncation",
            CliError::Core(_) => "invalid-parameter",
            CliError::Io(_) => "io",
            CliError::In { .. } => unreachable!(),
        }
    }

    /// Process exit code: 2 parse, 3 invalid parameters, 4 refused
    /// truncation, 5 I/O.
    pub fn exit_code(&self) -> i32 {
        match self.kind() {
            "parse" => 2,
            "invalid-parameter" => 3,
            "refused-truncation" => 4,
            _ => 5,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let experiment = match self {
            CliError::In { id, .. } => Some(id.clone()),
            _ => None,
        };
        serde_json::json!({
            "error": self.kind(),
            "experiment": experiment,
            "message": self.to_string(),
        })
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

/// Resolve the output directory: flag, then environment, then default.
pub fn output_dir(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub id: String,
    pub kind: &'static str,
    pub files: Vec<String>,
    pub checks: Vec<Check>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub name: String,
    pub library_version: &'static str,
    pub timestamp_unix: u64,
    pub wall_time_seconds: f64,
    pub config: serde_json::Value,
    pub experiments: Vec<ExperimentReport>,
}

impl RunReport {
    pub fn all_checks(&self) -> impl Iterator<Item = (&str, &Check)> {
        self.experiments
            .iter()
            .flat_map(|e| e.checks.iter().map(move |c| (e.id.as_str(), c)))
    }

    pub fn failures(&self) -> Vec<(&str, &Check)> {
        self.all_checks().filter(|(_, c)| !c.passed()).collect()
    }
}

/// Validate, run and persist every experiment of `config` into `out`.
pub fn run(config: &ExperimentConfig, out: &Path) -> Result<RunReport, CliError> {
    config.validate()?;
    let started = Instant::now();
    let timestamp_unix = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let outcomes = config
        .experiments
        .par_iter()
        .map(|e| run_experiment(&e.spec, config.thresholds).map_err(|err| err.within(&e.id)))
        .collect::<Result<Vec<_>, _>>()?;

    std::fs::create_dir_all(out).map_err(|e| io_err(out, e))?;
    let mut verdicts = Table::new(
        "verdicts",
        &[
            "experiment",
            "check",
            "verdict",
            "statistic",
            "diverge_fraction",
            "converge_increment",
            "converge_ratio",
            "tolerance",
        ],
    );
    let mut experiments = Vec::new();
    for (e, outcome) in config.experiments.iter().zip(outcomes) {
        let mut files = Vec::new();
        for t in &outcome.tables {
            let name = format!("{}.{}.csv", e.id, t.name);
            write_table(t, &out.join(&name))?;
            files.push(name);
        }
        for c in &outcome.checks {
            let mut cells = vec![table::Cell::from(e.id.as_str())];
            cells.extend(check_cells(c));
            verdicts.push(cells);
        }
        experiments.push(ExperimentReport {
            id: e.id.clone(),
            kind: e.spec.kind_name(),
            files,
            checks: outcome.checks,
        });
    }
    write_table(&verdicts, &out.join("verdicts.csv"))?;

    let report = RunReport {
        name: config.name.clone(),
        library_version: env!("CARGO_PKG_VERSION"),
        timestamp_unix,
        wall_time_seconds: started.elapsed().as_secs_f64(),
        config: serde_json::to_value(config).map_err(|e| CliError::Io(e.to_string()))?,
        experiments,
    };
    let path = out.join("report.json");
    let text = serde_json::to_string_pretty(&report).map_err(|e| io_err(&path, e))?;
    std::fs::write(&path, text + "\n").map_err(|e| io_err(&path, e))?;
    Ok(report)
}

fn write_table(t: &Table, path: &Path) -> Result<(), CliError> {
    let f = std::fs::File::create(path).map_err(|e| io_err(path, e))?;
    t.write_csv(std::io::BufWriter::new(f)).map_err(|e| io_err(path, e))
}

/// Human-readable plan: experiments in order, with windows and estimated
/// term counts. Nothing is computed beyond parameter validation.
pub fn describe(config: &ExperimentConfig) -> Result<String, CliError> {
    use std::fmt::Write;
    use config::{FolnerSpec, ShiftSpec};

    config.validate()?;
    let mut s = String::new();
    let _ = writeln!(s, "config `{}`: {} experiment(s)", config.name, config.experiments.len());
    for (i, e) in config.experiments.iter().enumerate() {
        let _ = write!(s, "{}. {} [{}]", i + 1, e.id, e.spec.kind_name());
        if let Some(f) = e.spec.family() {
            let _ = write!(s, " family={}", f.kind_name());
        }
        let _ = writeln!(s);
        let windows = |sch: &config::ScheduleSpec| -> Result<Vec<u64>, CliError> {
            let fam = e.spec.family().unwrap().build()?;
            Ok(sch.resolve(&fam)?.windows()?)
        };
        let folner_sizes = |f: &FolnerSpec, dim: usize| -> Result<Vec<u64>, CliError> {
            let seq = f.build(dim)?;
            Ok((0..seq.len()).map(|i| seq.set_size(i)).collect())
        };
        match &e.spec {
            ExperimentSpec::Kakutani { schedule, .. }
            | ExperimentSpec::NonAtomicity { schedule, .. }
            | ExperimentSpec::Semistationarity { schedule, .. } => {
                let w = windows(schedule)?;
                let _ = writeln!(s, "   windows {w:?}; terms per window 2N+1 (segments collapse constant runs)");
            }
            ExperimentSpec::ErgodicityCriteria { schedule, subsets, .. } => {
                let w = windows(schedule)?;
                let k = e.spec.family().unwrap().build()?.k();
                let n = subsets.as_ref().map_or((1usize << k) - 2, Vec::len);
                let _ = writeln!(s, "   {n} subset series at windows {w:?}");
            }
            ExperimentSpec::Conservativity { shifts, j_window, .. } => {
                let count = match shifts {
                    ShiftSpec::Window { schedule } => {
                        let m = *windows(schedule)?.last().unwrap();
                        2 * m + 1
                    }
                    ShiftSpec::Points { shifts } => shifts.len() as u64,
                    ShiftSpec::BlockShifts { levels } => levels.len() as u64,
                };
                let _ = writeln!(s, "   {count} shifts, inner sums over |j| <= {j_window}");
            }
            ExperimentSpec::CocycleBounds { instances, regular, .. } => {
                let extra = if regular.is_some() { " + permutation instances" } else { "" };
                let _ = writeln!(s, "   {instances} random pairs{extra}");
            }
            ExperimentSpec::RatioAverage { folner, seeds, family, .. } => {
                let sizes = folner_sizes(folner, family.dim())?;
                let _ = writeln!(s, "   {} seeds; Følner set sizes per step {sizes:?}", seeds.len());
            }
            ExperimentSpec::WeakMixingProbe { folner, seeds, family, .. } => {
                let sizes = folner_sizes(folner, family.dim())?;
                let _ = writeln!(s, "   {} starts; Følner set sizes per step {sizes:?}", seeds.len());
            }
            ExperimentSpec::Example33Verification { levels, block_levels, .. } => {
                let _ = writeln!(
                    s,
                    "   conditions (i)-(iii), facts (I)-(II) over {levels} levels; block shifts at levels {block_levels:?}"
                );
            }
            ExperimentSpec::MarkovConsistency { cylinders, max_len, .. } => {
                let _ = writeln!(
                    s,
                    "   {} consistency checks ({cylinders} cylinders of length <= {max_len}, left and right extensions)",
                    2 * cylinders
                );
            }
            ExperimentSpec::MarkovCocycle { pairs, max_len, .. } => {
                let _ = writeln!(s, "   {pairs} path pairs of length <= {max_len}");
            }
        }
    }
    Ok(s)
}

/// Load a config and apply a seed override.
pub fn load(path: &Path, seed_override: Option<u64>) -> Result<ExperimentConfig, CliError> {
    let mut c = ExperimentConfig::load(path)?;
    if let Some(s) = seed_override {
        for e in &mut c.experiments {
            e.spec.override_seeds(s);
        }
    }
    Ok(c)
}
