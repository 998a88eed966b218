//! Scenario suites: parsing, parallel execution and reports.

pub mod checks;
pub mod config;
pub mod report;

use std::fmt;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;

pub use checks::{find_check, run_check, CheckOutput, Measurement, CHECKS};
pub use config::{load_scenarios, parse_scenarios, Kind, ParamValue, Provenance, Scenario, SchemaError};
pub use report::{MeasurementReport, Report, ScenarioReport};

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub jobs: Option<usize>,
    /// Replaces every scenario's seed.
    pub seed: Option<u64>,
    /// Glob over scenario ids.
    pub filter: Option<String>,
}

/// Output of one scenario before it is written anywhere.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub report: ScenarioReport,
    pub table: Option<String>,
    pub seconds: f64,
}

pub fn select(scenarios: Vec<Scenario>, options: &RunOptions) -> Result<Vec<Scenario>, glob::PatternError> {
    let pattern = options.filter.as_deref().map(glob::Pattern::new).transpose()?;
    Ok(scenarios
        .into_iter()
        .filter(|s| pattern.as_ref().is_none_or(|p| p.matches(&s.id)))
        .map(|mut s| {
            if let Some(seed) = options.seed {
                s.seed = seed;
            }
            s
        })
        .collect())
}

pub fn run_scenario(s: &Scenario) -> Outcome {
    let start = Instant::now();
    let result = run_check(s);
    let seconds = start.elapsed().as_secs_f64();
    let (report, table) = match result {
        Ok(out) => (ScenarioReport::from_output(s, &out), out.table),
        Err(e) => (ScenarioReport::from_error(s, &e.to_string()), None),
    };
    Outcome { report, table, seconds }
}

/// Run `scenarios` on a pool of `jobs` threads; outcomes keep input order.
pub fn run_all(scenarios: &[Scenario], jobs: Option<usize>) -> std::result::Result<Vec<Outcome>, rayon::ThreadPoolBuildError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        builder = builder.num_threads(j.max(1));
    }
    let pool = builder.build()?;
    Ok(pool.install(|| scenarios.par_iter().map(run_scenario).collect()))
}

/// Run a suite file and write `report.json`, `summary.csv`, `timing.csv` and tables under `out`.
pub fn run_suite(suite: &Path, out: &Path, options: &RunOptions) -> Result<Report, RunError> {
    let scenarios = load_scenarios(suite).map_err(RunError::Schema)?;
    let scenarios = select(scenarios, options).map_err(|e| RunError::Usage(e.to_string()))?;
    let outcomes = run_all(&scenarios, options.jobs).map_err(|e| RunError::Usage(e.to_string()))?;
    let name = suite.file_name().map_or_else(String::new, |n| n.to_string_lossy().into_owned());
    let report = Report::new(name, outcomes.iter().map(|o| o.report.clone()).collect());
    report::write_outputs(out, &report, &scenarios, &outcomes).map_err(RunError::Io)?;
    Ok(report)
}

#[derive(Debug)]
pub enum RunError {
    Schema(Vec<SchemaError>),
    Usage(String),
    Io(std::io::Error),
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Schema(errs) => {
                let lines: Vec<String> = errs.iter().map(ToString::to_string).collect();
                write!(f, "{}", lines.join("\n"))
            }
            RunError::Usage(m) => write!(f, "{m}"),
            RunError::Io(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for RunError {}
