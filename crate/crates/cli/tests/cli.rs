use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn gdad(args: &[&str], env_out: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_gdad"));
    cmd.args(args).env_remove("GDAD_OUT");
    if let Some(dir) = env_out {
        cmd.env("GDAD_OUT", dir);
    }
    cmd.output().expect("binary runs")
}

fn report(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

#[test]
fn quadratic_saddle_run_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("q");
    let o = gdad(
        &[
            "run",
            "--problem",
            "quadratic-saddle",
            "--mu-x",
            "1",
            "--mu-y",
            "1",
            "--b",
            "2",
            "--regime",
            "two-sided-pl",
            "--T",
            "200",
            "--x0",
            "1",
            "--y0",
            "1",
            "--out",
            out.to_str().unwrap(),
        ],
        None,
    );
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let r = report(&out);
    assert_eq!(r["condition_number"]["kappa"], 2.0);
    assert_eq!(r["rate_checks"][0]["bound_exponent"], 1.0 / 80.0);
    assert_eq!(r["pass"], true);
    for f in ["trajectory.csv", "lyapunov.svg", "gradnorm.svg"] {
        assert!(out.join(f).exists());
    }
}

#[test]
fn bilinear_override_is_off_schedule_with_conservation() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("bl");
    let o = gdad(
        &[
            "run",
            "--problem",
            "bilinear",
            "--alpha",
            "1",
            "--beta",
            "1",
            "--T",
            "6.2832",
            "--out",
            out.to_str().unwrap(),
        ],
        None,
    );
    assert_eq!(o.status.code(), Some(0));
    let r = report(&out);
    assert_eq!(r["off_schedule"], true);
    assert!(r["rate_checks"].as_array().unwrap().is_empty());
    assert_eq!(r["calibration"]["conservation"]["pass"], true);
    assert!(
        r["calibration"]["conservation"]["max_drift"]
            .as_f64()
            .unwrap()
            <= 1e-8
    );
}

#[test]
fn negative_horizon_exits_2_without_files() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("neg");
    let o = gdad(
        &[
            "run",
            "--problem",
            "quadratic-saddle",
            "--T",
            "-1",
            "--out",
            out.to_str().unwrap(),
        ],
        None,
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn invalid_configurations_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("x");
    let out = out.to_str().unwrap();
    for args in [
        vec!["run", "--problem", "nope", "--out", out],
        vec!["run", "--problem", "bilinear", "--out", out],
        vec![
            "run",
            "--problem",
            "nc-sc",
            "--regime",
            "two-sided-pl",
            "--out",
            out,
        ],
        vec!["run", "--problem", "nc-sc", "--dt", "0", "--out", out],
        vec!["run", "--problem", "nc-sc", "--x0", "1,2", "--out", out],
        vec![
            "run",
            "--problem",
            "nc-sc",
            "--checks",
            "everything",
            "--out",
            out,
        ],
    ] {
        assert_eq!(gdad(&args, None).status.code(), Some(2), "{args:?}");
    }
    assert!(!Path::new(out).exists());
}

#[test]
fn unknown_preset_exits_2() {
    assert_eq!(gdad(&["suite", "everything"], None).status.code(), Some(2));
}

#[test]
fn divergence_exits_3_with_partial_report() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("div");
    let o = gdad(
        &[
            "run",
            "--problem",
            "bilinear",
            "--alpha",
            "1",
            "--beta",
            "1",
            "--T",
            "1e4",
            "--dt",
            "3",
            "--out",
            out.to_str().unwrap(),
        ],
        None,
    );
    assert_eq!(o.status.code(), Some(3));
    let r = report(&out);
    assert!(r["diverged_at"].is_number());
    assert_eq!(r["pass"], false);
}

#[test]
fn config_file_with_flag_override_and_env_root() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.cfg");
    fs::write(
        &cfg,
        "# short nc-sc run\nproblem = nc-sc\nmu-y = 1\nb = 2\nT = 1000\nx0 = 0.5\ny0 = -0.5\n",
    )
    .unwrap();
    let root = tmp.path().join("root");
    let o = gdad(
        &["run", "--config", cfg.to_str().unwrap(), "--T", "10"],
        Some(&root),
    );
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let runs: Vec<_> = fs::read_dir(&root).unwrap().collect();
    assert_eq!(runs.len(), 1);
    let dir = runs.into_iter().next().unwrap().unwrap().path();
    let r = report(&dir);
    assert_eq!(r["integrator"]["T"], 10.0);
    assert_eq!(r["x0"][0], 0.5);
    assert_eq!(
        r["run_id"].as_str().unwrap(),
        dir.file_name().unwrap().to_str().unwrap()
    );
}

#[test]
fn seeded_random_start_is_recorded_and_repeatable() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for d in [&a, &b] {
        let o = gdad(
            &[
                "run",
                "--problem",
                "sc-nc",
                "--T",
                "5",
                "--seed",
                "7",
                "--out",
                d.to_str().unwrap(),
            ],
            None,
        );
        assert_eq!(o.status.code(), Some(0));
    }
    assert_eq!(
        fs::read(a.join("report.json")).unwrap(),
        fs::read(b.join("report.json")).unwrap()
    );
    assert_eq!(report(&a)["seed"], 7);
}

#[test]
fn calibration_suite_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let o = gdad(
        &[
            "suite",
            "calibration",
            "--out",
            tmp.path().to_str().unwrap(),
        ],
        None,
    );
    assert_eq!(o.status.code(), Some(0));
    let summary: Value = serde_json::from_str(
        &fs::read_to_string(tmp.path().join("calibration/summary.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(summary["pass"], true);
    assert!(tmp.path().join("calibration/calibration.json").exists());
}
