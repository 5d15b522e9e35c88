use std::fs;

use gdad_core::experiment::{canonical_config, run, suite, ExperimentConfig, Preset, EXIT_PASS};
use gdad_core::verify::Theorem;
use gdad_core::Exec;
use serde_json::Value;

const SCHEMA_FIELDS: [&str; 9] = [
    "run_id",
    "problem",
    "regime",
    "steps",
    "integrator",
    "certificates",
    "rate_checks",
    "lemma_audits",
    "pass",
];

fn short(theorem: Theorem, dir: &std::path::Path) -> ExperimentConfig {
    let mut cfg = canonical_config(theorem, dir);
    cfg.integrator.horizon = 20.0;
    cfg
}

#[test]
fn report_follows_schema() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&short(Theorem::Thm1, dir.path())).unwrap();
    assert_eq!(out.exit_code, EXIT_PASS);
    let text = fs::read_to_string(dir.path().join("report.json")).unwrap();
    let v: Value = serde_json::from_str(&text).unwrap();
    // Top-level fields come first, in schema order.
    let top: Vec<&str> = text
        .lines()
        .filter_map(|l| l.strip_prefix("  \"")?.split('"').next())
        .collect();
    assert_eq!(&top[..9], &SCHEMA_FIELDS);
    for k in ["alpha", "beta", "gamma", "orientation"] {
        assert!(v["steps"].get(k).is_some(), "steps.{k}");
    }
    for k in ["method", "dt", "T", "budget"] {
        assert!(v["integrator"].get(k).is_some(), "integrator.{k}");
    }
    assert_eq!(v["steps"]["gamma"], 4.0);
    assert_eq!(v["regime"], "two-sided-pl");
    assert_eq!(v["pass"], true);
    assert_eq!(v["rate_checks"][0]["bound_exponent"], 1.0 / 80.0);
    for f in ["trajectory.csv", "lyapunov.svg", "gradnorm.svg", "lem2.csv"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
}

#[test]
fn outputs_are_byte_stable() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run(&short(Theorem::Thm3, a.path())).unwrap();
    run(&short(Theorem::Thm3, b.path())).unwrap();
    for f in [
        "report.json",
        "trajectory.csv",
        "lyapunov.svg",
        "gradnorm.svg",
        "lem4.csv",
    ] {
        assert_eq!(
            fs::read(a.path().join(f)).unwrap(),
            fs::read(b.path().join(f)).unwrap(),
            "{f} differs"
        );
    }
}

#[test]
fn override_disables_rate_checks() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = short(Theorem::Thm1, dir.path());
    cfg.alpha = Some(0.5);
    let out = run(&cfg).unwrap();
    assert!(out.report.off_schedule);
    assert!(out.report.rate_checks.is_empty());
    assert!(out.report.proof_identities.is_empty());
}

#[test]
fn theorem_suite_writes_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = suite(Preset::AllTheorems, dir.path(), Exec::default()).unwrap();
    assert_eq!(out.exit_code, EXIT_PASS);
    let root = dir.path().join("all-theorems");
    let summary: Value =
        serde_json::from_str(&fs::read_to_string(root.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["runs"].as_array().unwrap().len(), 4);
    assert_eq!(summary["pass"], true);
    for t in ["thm1", "thm2", "thm3", "thm4"] {
        assert!(root.join(t).join("report.json").exists());
    }
}
