//! Suite files: `version = 1` followed by `[[scenario]]` tables.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use toml::Spanned;

use super::checks::{find_check, ParamType};

pub const SCHEMA_VERSION: i64 = 1;
pub const DEFAULT_SEED: u64 = 0;
/// Grid used when a scenario gives no `duration` or `nodes`.
pub const DEFAULT_DURATION: f64 = 1.0;
pub const DEFAULT_NODES: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    GaussianCheck,
    ConditioningCheck,
    LocalizationCheck,
    GammaPoissonCheck,
    DeterminantCheck,
    VariationalCheck,
}

impl Kind {
    pub fn as_str(self) -> &'static str {
        match self {
            Kind::GaussianCheck => "gaussian_check",
            Kind::ConditioningCheck => "conditioning_check",
            Kind::LocalizationCheck => "localization_check",
            Kind::GammaPoissonCheck => "gamma_poisson_check",
            Kind::DeterminantCheck => "determinant_check",
            Kind::VariationalCheck => "variational_check",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Paper,
    Trivial,
    Derived,
}

impl Provenance {
    pub fn tag(self) -> &'static str {
        match self {
            Provenance::Paper => "[PAPER]",
            Provenance::Trivial => "[TRIVIAL]",
            Provenance::Derived => "[DERIVED]",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s.trim_start_matches('[').trim_end_matches(']') {
            "PAPER" => Some(Provenance::Paper),
            "TRIVIAL" => Some(Provenance::Trivial),
            "DERIVED" => Some(Provenance::Derived),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ParamValue {
    Float(f64),
    Int(i64),
    Str(String),
    List(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub id: String,
    pub kind: Kind,
    pub check: String,
    pub seed: u64,
    pub provenance: Provenance,
    pub parameters: BTreeMap<String, ParamValue>,
    pub tolerances: BTreeMap<String, f64>,
    /// Relative path for the check's CSV table, if any.
    pub output: Option<String>,
    /// Line of the `[[scenario]]` header.
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SchemaError {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for SchemaError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSuite {
    version: Spanned<i64>,
    #[serde(default)]
    scenario: Vec<Spanned<RawScenario>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    id: Spanned<String>,
    kind: Spanned<Kind>,
    check: Spanned<String>,
    provenance: Spanned<String>,
    seed: Option<Spanned<i64>>,
    #[serde(default)]
    parameters: BTreeMap<String, Spanned<toml::Value>>,
    #[serde(default)]
    tolerances: BTreeMap<String, Spanned<f64>>,
    output: Option<Spanned<String>>,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].bytes().filter(|&b| b == b'\n').count() + 1
}

pub fn load_scenarios(path: &Path) -> Result<Vec<Scenario>, Vec<SchemaError>> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        vec![SchemaError {
            line: 0,
            message: format!("cannot read {}: {e}", path.display()),
        }]
    })?;
    parse_scenarios(&text)
}

/// Parse and validate a suite; every problem found is reported.
pub fn parse_scenarios(text: &str) -> Result<Vec<Scenario>, Vec<SchemaError>> {
    let raw: RawSuite = toml::from_str(text).map_err(|e| {
        vec![SchemaError {
            line: e.span().map_or(0, |s| line_of(text, s.start)),
            message: e.message().trim().to_string(),
        }]
    })?;
    let mut errors = Vec::new();
    if *raw.version.get_ref() != SCHEMA_VERSION {
        errors.push(SchemaError {
            line: line_of(text, raw.version.span().start),
            message: format!("unsupported schema version {} (expected {SCHEMA_VERSION})", raw.version.get_ref()),
        });
    }
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for s in raw.scenario {
        let line = line_of(text, s.span().start);
        let s = s.into_inner();
        let at = |sp: std::ops::Range<usize>| line_of(text, sp.start);
        let id = s.id.get_ref().clone();
        if id.is_empty() {
            errors.push(SchemaError { line: at(s.id.span()), message: "empty scenario id".into() });
        }
        if !seen.insert(id.clone()) {
            errors.push(SchemaError { line: at(s.id.span()), message: format!("duplicate scenario id `{id}`") });
        }
        let kind = *s.kind.get_ref();
        let provenance = match Provenance::parse(s.provenance.get_ref()) {
            Some(p) => p,
            None => {
                errors.push(SchemaError {
                    line: at(s.provenance.span()),
                    message: format!("unknown provenance `{}` (PAPER, TRIVIAL or DERIVED)", s.provenance.get_ref()),
                });
                Provenance::Derived
            }
        };
        let seed = match &s.seed {
            Some(v) if *v.get_ref() < 0 => {
                errors.push(SchemaError { line: at(v.span()), message: "seed must be non-negative".into() });
                DEFAULT_SEED
            }
            Some(v) => *v.get_ref() as u64,
            None => DEFAULT_SEED,
        };
        let Some(spec) = find_check(kind, s.check.get_ref()) else {
            errors.push(SchemaError {
                line: at(s.check.span()),
                message: format!("unknown check `{}` for kind {}", s.check.get_ref(), kind.as_str()),
            });
            continue;
        };
        let mut parameters = BTreeMap::new();
        for (key, value) in &s.parameters {
            let line = at(value.span());
            let Some((_, ty)) = spec.params.iter().find(|(k, _)| k == key) else {
                errors.push(SchemaError {
                    line,
                    message: format!("unknown parameter `{key}` for check {}", spec.name),
                });
                continue;
            };
            match convert(value.get_ref(), *ty) {
                Some(v) => {
                    parameters.insert(key.clone(), v);
                }
                None => errors.push(SchemaError {
                    line,
                    message: format!("parameter `{key}` must be {}", ty.describe()),
                }),
            }
        }
        let mut tolerances = BTreeMap::new();
        for (key, value) in &s.tolerances {
            if !spec.tolerances.iter().any(|(k, _)| k == key) {
                errors.push(SchemaError {
                    line: at(value.span()),
                    message: format!("unknown tolerance `{key}` for check {}", spec.name),
                });
            } else if !(*value.get_ref() >= 0.0) {
                errors.push(SchemaError { line: at(value.span()), message: format!("tolerance `{key}` must be ≥ 0") });
            } else {
                tolerances.insert(key.clone(), *value.get_ref());
            }
        }
        out.push(Scenario {
            id,
            kind,
            check: s.check.into_inner(),
            seed,
            provenance,
            parameters,
            tolerances,
            output: s.output.map(|o| o.into_inner()),
            line,
        });
    }
    if errors.is_empty() {
        Ok(out)
    } else {
        Err(errors)
    }
}

fn convert(v: &toml::Value, ty: ParamType) -> Option<ParamValue> {
    match (ty, v) {
        (ParamType::Float, toml::Value::Float(x)) => Some(ParamValue::Float(*x)),
        (ParamType::Float, toml::Value::Integer(x)) => Some(ParamValue::Float(*x as f64)),
        (ParamType::Int, toml::Value::Integer(x)) if *x >= 0 => Some(ParamValue::Int(*x)),
        (ParamType::Str, toml::Value::String(s)) => Some(ParamValue::Str(s.clone())),
        (ParamType::List, toml::Value::Array(a)) => a
            .iter()
            .map(|x| match x {
                toml::Value::Float(f) => Some(*f),
                toml::Value::Integer(i) => Some(*i as f64),
                _ => None,
            })
            .collect::<Option<Vec<f64>>>()
            .map(ParamValue::List),
        _ => None,
    }
}

impl Scenario {
    pub fn f64(&self, key: &str, default: f64) -> f64 {
        match self.parameters.get(key) {
            Some(ParamValue::Float(x)) => *x,
            Some(ParamValue::Int(x)) => *x as f64,
            _ => default,
        }
    }

    pub fn usize(&self, key: &str, default: usize) -> usize {
        match self.parameters.get(key) {
            Some(ParamValue::Int(x)) => *x as usize,
            _ => default,
        }
    }

    pub fn str<'a>(&'a self, key: &str, default: &'a str) -> &'a str {
        match self.parameters.get(key) {
            Some(ParamValue::Str(s)) => s,
            _ => default,
        }
    }

    pub fn list(&self, key: &str, default: &[f64]) -> Vec<f64> {
        match self.parameters.get(key) {
            Some(ParamValue::List(v)) => v.clone(),
            _ => default.to_vec(),
        }
    }

    /// Uniform grid on `[0, duration]` from the parameters or the defaults.
    pub fn grid(&self) -> crate::Result<crate::lattice::TimeGrid> {
        crate::lattice::make_grid(0.0, self.f64("duration", DEFAULT_DURATION), self.usize("nodes", DEFAULT_NODES))
    }

    /// The scenario's tolerance for `name`, else the check's default.
    pub fn tolerance(&self, name: &str) -> f64 {
        if let Some(t) = self.tolerances.get(name) {
            return *t;
        }
        find_check(self.kind, &self.check)
            .and_then(|c| c.tolerances.iter().find(|(k, _)| *k == name).map(|(_, t)| *t))
            .unwrap_or(0.0)
    }
}
