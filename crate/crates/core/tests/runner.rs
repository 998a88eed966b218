use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use lattice_integrators::runner::config::{DEFAULT_DURATION, DEFAULT_NODES};
use lattice_integrators::runner::{load_scenarios, parse_scenarios, run_all, select, Kind, Provenance, RunOptions};

fn suite_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../suites/desk.toml")
}

fn latint(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_latint"))
        .args(args)
        .env_remove("LATINT_OUT_DIR")
        .output()
        .expect("binary runs")
}

const MINIMAL: &str = r#"
version = 1

[[scenario]]
id = "minimal"
kind = "gaussian_check"
check = "identities"
provenance = "TRIVIAL"
"#;

#[test]
fn minimal_scenario_uses_default_grid() {
    let s = parse_scenarios(MINIMAL).unwrap();
    assert_eq!(s.len(), 1);
    assert_eq!(s[0].kind, Kind::GaussianCheck);
    assert_eq!(s[0].seed, 0);
    let grid = s[0].grid().unwrap();
    assert_eq!(grid.len(), DEFAULT_NODES);
    assert_eq!(grid.len(), 64);
    assert_eq!(grid.duration(), DEFAULT_DURATION);
    assert_eq!(grid.duration(), 1.0);
}

#[test]
fn unknown_parameter_is_named() {
    let text = format!("{MINIMAL}parameters = {{ sigma = 0.5 }}\n");
    let errs = parse_scenarios(&text).unwrap_err();
    assert_eq!(errs.len(), 1);
    assert!(errs[0].message.contains("sigma"), "{}", errs[0]);
    assert_eq!(errs[0].line, 9);
}

#[test]
fn unknown_top_level_key_is_named() {
    let text = MINIMAL.replace("provenance = \"TRIVIAL\"", "provenance = \"TRIVIAL\"\nsigma = 1");
    let errs = parse_scenarios(&text).unwrap_err();
    assert!(errs[0].message.contains("sigma"), "{}", errs[0]);
}

#[test]
fn schema_errors_carry_lines() {
    let bad = r#"version = 1

[[scenario]]
id = "a"
kind = "gaussian_check"
check = "moments"
provenance = "GUESSED"
parameters = { nodes = "many" }

[[scenario]]
id = "a"
kind = "gaussian_check"
check = "nonsense"
provenance = "PAPER"
"#;
    let errs = parse_scenarios(bad).unwrap_err();
    let lines: Vec<usize> = errs.iter().map(|e| e.line).collect();
    assert_eq!(lines, vec![7, 8, 11, 13]);
    assert!(errs[1].message.contains("nodes"));
    assert!(errs[2].message.contains("duplicate"));
}

#[test]
fn bad_enum_and_missing_field_rejected() {
    let bad_kind = MINIMAL.replace("gaussian_check", "quantum_check");
    assert!(parse_scenarios(&bad_kind).unwrap_err()[0].message.contains("quantum_check"));
    let missing = MINIMAL.replace("check = \"identities\"\n", "");
    assert!(parse_scenarios(&missing).unwrap_err()[0].message.contains("check"));
    let version = MINIMAL.replace("version = 1", "version = 2");
    assert!(parse_scenarios(&version).unwrap_err()[0].message.contains("version"));
}

#[test]
fn desk_suite_parses_in_file_order() {
    let s = load_scenarios(&suite_path()).unwrap();
    assert_eq!(s.len(), 12);
    let text = fs::read_to_string(suite_path()).unwrap();
    let mut positions: Vec<usize> = s.iter().map(|x| text.find(&format!("id = \"{}\"", x.id)).unwrap()).collect();
    let sorted = {
        let mut p = positions.clone();
        p.sort();
        p
    };
    assert_eq!(positions, sorted);
    positions.dedup();
    assert_eq!(positions.len(), 12);
}

#[test]
fn filter_and_seed_override() {
    let s = load_scenarios(&suite_path()).unwrap();
    let picked = select(
        s,
        &RunOptions {
            filter: Some("*-normalization".into()),
            seed: Some(99),
            jobs: None,
        },
    )
    .unwrap();
    assert_eq!(picked.len(), 1);
    assert_eq!(picked[0].id, "pinned-normalization");
    assert_eq!(picked[0].seed, 99);
}

fn cheap_scenarios() -> Vec<lattice_integrators::runner::Scenario> {
    let s = load_scenarios(&suite_path()).unwrap();
    s.into_iter().filter(|x| x.id != "gaussian-moments").collect()
}

#[test]
fn report_order_independent_of_parallelism() {
    let s = cheap_scenarios();
    let one = run_all(&s, Some(1)).unwrap();
    let four = run_all(&s, Some(4)).unwrap();
    let ids: Vec<&str> = one.iter().map(|o| o.report.id.as_str()).collect();
    let want: Vec<&str> = s.iter().map(|x| x.id.as_str()).collect();
    assert_eq!(ids, want);
    for (a, b) in one.iter().zip(&four) {
        assert_eq!(a.report, b.report);
    }
}

#[test]
fn provenance_tags_copied_to_every_reference() {
    let s = cheap_scenarios();
    for (scenario, outcome) in s.iter().zip(run_all(&s, None).unwrap()) {
        assert!(!outcome.report.measurements.is_empty());
        for m in &outcome.report.measurements {
            assert_eq!(m.provenance, scenario.provenance.tag());
        }
    }
    assert_eq!(Provenance::Derived.tag(), "[DERIVED]");
}

#[test]
fn module_errors_are_captured_per_scenario() {
    let text = r#"version = 1

[[scenario]]
id = "broken"
kind = "conditioning_check"
check = "fubini"
provenance = "PAPER"
parameters = { functional = "missing" }

[[scenario]]
id = "fine"
kind = "localization_check"
check = "pinned_normalization"
provenance = "PAPER"
"#;
    let out = run_all(&parse_scenarios(text).unwrap(), Some(2)).unwrap();
    assert!(!out[0].report.passed);
    assert!(out[0].report.error.as_deref().unwrap().contains("missing"));
    assert!(out[1].report.passed);
}

#[test]
fn empty_suite_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let suite = dir.path().join("empty.toml");
    fs::write(&suite, "version = 1\n").unwrap();
    let out_dir = dir.path().join("out");
    let o = latint(&["run", suite.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(out_dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["reports"].as_array().unwrap().len(), 0);
    let summary = fs::read_to_string(out_dir.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 1);
}

#[test]
fn failing_tolerance_exits_one_and_marks_check() {
    let dir = tempfile::tempdir().unwrap();
    let suite = dir.path().join("strict.toml");
    fs::write(
        &suite,
        r#"version = 1

[[scenario]]
id = "strict"
kind = "conditioning_check"
check = "fubini"
provenance = "PAPER"
parameters = { functional = "gaussian" }
tolerances = { value = 0.0 }
"#,
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let o = latint(&["run", suite.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(out_dir.join("report.json")).unwrap()).unwrap();
    let ms = report["reports"][0]["measurements"].as_array().unwrap();
    let value = ms.iter().find(|m| m["name"] == "value").unwrap();
    let swap = ms.iter().find(|m| m["name"] == "order_swap").unwrap();
    assert_eq!(value["passed"], false);
    assert_eq!(swap["passed"], true);
    assert_eq!(report["reports"][0]["passed"], false);
}

#[test]
fn schema_error_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let suite = dir.path().join("bad.toml");
    fs::write(&suite, format!("{MINIMAL}parameters = {{ sigma = 1.0 }}\n")).unwrap();
    let o = latint(&["run", suite.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("sigma"));
}

#[test]
fn env_var_sets_output_dir_and_tables_are_written() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("from-env");
    let o = Command::new(env!("CARGO_BIN_EXE_latint"))
        .args(["run", suite_path().to_str().unwrap(), "--filter", "bridge-*"])
        .env("LATINT_OUT_DIR", &out_dir)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let table = fs::read_to_string(out_dir.join("tables/bridge_kernel.csv")).unwrap();
    assert_eq!(table.lines().count(), 257);
    assert!(out_dir.join("timing.csv").exists());
}

#[test]
fn output_path_must_stay_inside() {
    let dir = tempfile::tempdir().unwrap();
    let suite = dir.path().join("escape.toml");
    fs::write(
        &suite,
        r#"version = 1

[[scenario]]
id = "escape"
kind = "localization_check"
check = "bridge_kernel"
provenance = "PAPER"
output = "../outside.csv"
parameters = { nodes = 8 }
"#,
    )
    .unwrap();
    let o = latint(&["run", suite.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!dir.path().join("outside.csv").exists());
}

#[test]
fn cli_reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for (out, jobs) in [(&a, "1"), (&b, "3")] {
        let o = latint(&["run", suite_path().to_str().unwrap(), "--out", out.to_str().unwrap(), "--jobs", jobs, "--filter", "[!g]*"]);
        assert_eq!(o.status.code(), Some(0));
    }
    for f in ["report.json", "summary.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn floats_use_seventeen_significant_digits() {
    use lattice_integrators::runner::report::sci;
    assert_eq!(sci(1.0), "1.0000000000000000e+0");
    assert_eq!(sci(-2.5e-12), "-2.4999999999999998e-12");
    assert_eq!(sci(0.1), "1.0000000000000001e-1");
    assert_eq!(sci(0.1).parse::<f64>().unwrap(), 0.1);
}
