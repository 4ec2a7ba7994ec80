//! Exercises the command-line surface: flags, file formats, exit codes.

use serde_json::Value;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cbm"))
}

fn run_to(dir: &Path, args: &[&str]) -> Output {
    bin()
        .args(args)
        .arg("--out-dir")
        .arg(dir)
        .output()
        .expect("binary runs")
}

#[test]
fn pi_is_rejected_with_usage_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_to(
        dir.path(),
        &["couple", "--eps", "0.3", "--theta", "3.1415926"],
    );
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("--theta") || err.contains("angle"), "{err}");
}

#[test]
fn unknown_flag_exits_2() {
    let out = bin().args(["verify", "--bogus"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_suite_exits_2_naming_the_flag() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_to(dir.path(), &["verify", "--suite", "nonsense"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--suite"));
}

#[test]
fn simulate_emits_figure_style_trajectory_csv() {
    // Small-scale version of the trajectory-plot example.
    let dir = tempfile::tempdir().unwrap();
    let out = run_to(
        dir.path(),
        &["simulate", "--theta", "7", "--eps", "0.02", "--paths", "1", "--seed", "3"],
    );
    assert_eq!(out.status.code(), Some(0));
    let csv = std::fs::read_to_string(dir.path().join("path_000.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,re,im"));
    assert_eq!(lines.next(), Some("0,0,0"));
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert!(rows.len() > 1000, "expected a dense trajectory");
    // Last breakpoint is the horizon.
    let last: Vec<f64> = rows
        .last()
        .unwrap()
        .split(',')
        .map(|v| v.parse().unwrap())
        .collect();
    assert_eq!(last[0], 1.0);

    let manifest: Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("simulate_manifest.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(manifest["seed"], 3);
}

#[test]
fn simulate_multi_theta_shares_skeleton() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_to(
        dir.path(),
        &[
            "simulate", "--theta", "2,7", "--eps", "0.1", "--paths", "1", "--grid", "4",
            "--dump-skeleton",
        ],
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let a = std::fs::read_to_string(dir.path().join("path_000_theta_2.csv")).unwrap();
    let b =
        std::fs::read_to_string(dir.path().join("path_000_theta_0.7168146928204138.csv")).unwrap();
    // Same grid, different values.
    let ts = |s: &str| -> Vec<String> {
        s.lines().skip(1).map(|l| l.split(',').next().unwrap().to_string()).collect()
    };
    assert_eq!(ts(&a), ts(&b));
    assert_ne!(a, b);
    let skel = std::fs::read_to_string(dir.path().join("skeleton_000.csv")).unwrap();
    assert!(skel.starts_with("time,jump_N,jump_Nprime\n"));
}

#[test]
fn couple_writes_ensemble_csv_with_fixed_schema() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_to(
        dir.path(),
        &["couple", "--eps", "0.2", "--theta", "2", "--backend", "grid", "--reps", "5"],
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("couple_ensemble.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next(),
        Some("eps,rep,sup_error,L1,L21,L22,L3,maxLambdaDev,maxGammaDev")
    );
    assert_eq!(lines.count(), 5);
    let diag: Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("couple_diagnostics.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(diag["realizations"].as_array().unwrap().len(), 5);
    assert!(diag["realizations"][0]["sup_error"].is_f64());

    // Skeleton backend leaves the sup_error column empty.
    let dir2 = tempfile::tempdir().unwrap();
    let out = run_to(dir2.path(), &["couple", "--eps", "0.2", "--theta", "2", "--reps", "3"]);
    assert_eq!(out.status.code(), Some(0));
    let csv = std::fs::read_to_string(dir2.path().join("couple_ensemble.csv")).unwrap();
    let row = csv.lines().nth(1).unwrap();
    assert_eq!(row.split(',').nth(2), Some(""));
}

#[test]
fn coarse_grid_step_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_to(
        dir.path(),
        &["couple", "--eps", "0.2", "--theta", "2", "--backend", "grid", "--grid-step", "0.01"],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("grid step"));
}

#[test]
fn config_file_supplies_defaults_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("run.json");
    std::fs::write(&cfg_path, r#"{"seed": 9, "format": "json"}"#).unwrap();

    let out = bin()
        .args(["verify", "--suite", "lemma32", "--config"])
        .arg(&cfg_path)
        .arg("--out-dir")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let report: Value = serde_json::from_slice(&out.stdout).expect("json stdout per config");
    assert_eq!(report["seed"], 9);

    // The --seed flag overrides the config key.
    let out = bin()
        .args(["verify", "--suite", "lemma32", "--seed", "4", "--config"])
        .arg(&cfg_path)
        .arg("--out-dir")
        .arg(dir.path())
        .output()
        .unwrap();
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["seed"], 4);
}

#[test]
fn out_dir_env_var_is_honored() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["verify", "--suite", "lemma32"])
        .env("CBM_OUT_DIR", dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(dir.path().join("verify_lemma32.json").exists());
}

#[test]
fn report_subcommand_rerenders_saved_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_to(dir.path(), &["verify", "--suite", "lemma32", "--seed", "1"]);
    assert_eq!(out.status.code(), Some(0));
    let path = dir.path().join("verify_lemma32.json");

    let table = bin()
        .args(["report", "--input"])
        .arg(&path)
        .output()
        .unwrap();
    assert_eq!(table.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&table.stdout).contains("lemma32a/eps=0.5"));

    let csv = bin()
        .args(["report", "--format", "csv", "--input"])
        .arg(&path)
        .output()
        .unwrap();
    assert!(String::from_utf8_lossy(&csv.stdout)
        .starts_with("name,estimate,standard_error,p_value,target"));

    let missing = bin()
        .args(["report", "--input", "/nonexistent.json"])
        .output()
        .unwrap();
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn rate_rejects_bad_ladder_with_usage_exit() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_to(dir.path(), &["rate", "--eps-list", "0.1,0.2", "--reps", "100"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run_to(dir.path(), &["rate", "--reps", "0"]);
    assert_eq!(out.status.code(), Some(2));
}
