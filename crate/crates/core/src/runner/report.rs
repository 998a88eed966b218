//! `report.json`, `summary.csv` and `timing.csv`.

use std::fs;
use std::io;
use std::path::{Component, Path};

use serde::Serialize;
use serde_json::{Number, Value};

use super::checks::CheckOutput;
use super::config::{Scenario, SCHEMA_VERSION};
use super::Outcome;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeasurementReport {
    pub name: String,
    #[serde(serialize_with = "ser_float")]
    pub measured: f64,
    #[serde(serialize_with = "ser_float")]
    pub reference: f64,
    #[serde(serialize_with = "ser_float")]
    pub tolerance: f64,
    pub provenance: &'static str,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioReport {
    pub id: String,
    pub kind: &'static str,
    pub check: String,
    pub seed: u64,
    pub provenance: &'static str,
    pub passed: bool,
    pub error: Option<String>,
    pub measurements: Vec<MeasurementReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub version: i64,
    pub library_version: &'static str,
    pub suite: String,
    pub reports: Vec<ScenarioReport>,
}

/// Fixed 17-significant-digit rendering so reports are byte-stable; non-finite values become `null`.
fn ser_float<S: serde::Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
    float_value(*x).serialize(s)
}

fn float_value(x: f64) -> Value {
    if !x.is_finite() {
        return Value::Null;
    }
    sci(x).parse::<Number>().map_or(Value::Null, Value::Number)
}

/// `d.dddddddddddddddde±N`: 17 significant digits with a signed exponent.
pub fn sci(x: f64) -> String {
    let s = format!("{x:.16e}");
    match s.split_once('e') {
        Some((m, e)) if !e.starts_with('-') => format!("{m}e+{e}"),
        _ => s,
    }
}

pub fn within(measured: f64, reference: f64, tolerance: f64) -> bool {
    (measured - reference).abs() <= tolerance
}

impl ScenarioReport {
    pub fn from_output(s: &Scenario, out: &CheckOutput) -> Self {
        let measurements: Vec<MeasurementReport> = out
            .measurements
            .iter()
            .map(|m| {
                let tolerance = s.tolerance(&m.name);
                MeasurementReport {
                    name: m.name.clone(),
                    measured: m.measured,
                    reference: m.reference,
                    tolerance,
                    provenance: s.provenance.tag(),
                    passed: within(m.measured, m.reference, tolerance),
                }
            })
            .collect();
        Self {
            id: s.id.clone(),
            kind: s.kind.as_str(),
            check: s.check.clone(),
            seed: s.seed,
            provenance: s.provenance.tag(),
            passed: measurements.iter().all(|m| m.passed),
            error: None,
            measurements,
        }
    }

    pub fn from_error(s: &Scenario, error: &str) -> Self {
        Self {
            id: s.id.clone(),
            kind: s.kind.as_str(),
            check: s.check.clone(),
            seed: s.seed,
            provenance: s.provenance.tag(),
            passed: false,
            error: Some(error.to_string()),
            measurements: Vec::new(),
        }
    }
}

impl Report {
    pub fn new(suite: String, reports: Vec<ScenarioReport>) -> Self {
        Self {
            version: SCHEMA_VERSION,
            library_version: env!("CARGO_PKG_VERSION"),
            suite,
            reports,
        }
    }

    pub fn passed(&self) -> bool {
        self.reports.iter().all(|r| r.passed)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn summary_csv(&self) -> io::Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["id", "kind", "check", "measurement", "measured", "reference", "tolerance", "provenance", "passed"])?;
        for r in &self.reports {
            if r.error.is_some() {
                w.write_record([&r.id, r.kind, &r.check, "error", "", "", "", r.provenance, "false"])?;
            }
            for m in &r.measurements {
                w.write_record([
                    r.id.as_str(),
                    r.kind,
                    &r.check,
                    &m.name,
                    &sci(m.measured),
                    &sci(m.reference),
                    &sci(m.tolerance),
                    m.provenance,
                    if m.passed { "true" } else { "false" },
                ])?;
            }
        }
        let bytes = w.into_inner().map_err(|e| e.into_error())?;
        Ok(String::from_utf8(bytes).expect("csv is utf-8"))
    }
}

fn timing_csv(outcomes: &[Outcome]) -> io::Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["id", "seconds"])?;
    for o in outcomes {
        w.write_record([o.report.id.as_str(), &format!("{:.6}", o.seconds)])?;
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv is utf-8"))
}

fn safe_relative(p: &Path) -> bool {
    p.components().all(|c| matches!(c, Component::Normal(_)))
}

pub fn write_outputs(out: &Path, report: &Report, scenarios: &[Scenario], outcomes: &[Outcome]) -> io::Result<()> {
    fs::create_dir_all(out)?;
    fs::write(out.join("report.json"), report.to_json())?;
    fs::write(out.join("summary.csv"), report.summary_csv()?)?;
    fs::write(out.join("timing.csv"), timing_csv(outcomes)?)?;
    for (s, o) in scenarios.iter().zip(outcomes) {
        let (Some(rel), Some(table)) = (&s.output, &o.table) else {
            continue;
        };
        let rel = Path::new(rel);
        if !safe_relative(rel) {
            return Err(io::Error::new(
                io::ErrorKind::InvalidInput,
                format!("output path {} must stay inside the output directory", rel.display()),
            ));
        }
        let path = out.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(path, table)?;
    }
    Ok(())
}
