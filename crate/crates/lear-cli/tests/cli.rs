//! End-to-end tests of the `lear` binary: exit codes, output files,
//! flag/config precedence.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use chrono::NaiveDate;
use lear::synth;

fn d(s: &str) -> NaiveDate {
    s.parse().unwrap()
}

fn lear_bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_lear"))
}

fn run(args: &[&str]) -> Output {
    lear_bin().args(args).output().expect("binary runs")
}

fn assert_exit(out: &Output, code: i32) {
    assert_eq!(
        out.status.code(),
        Some(code),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

/// Synthetic dataset CSV on disk; returns its path.
fn write_dataset(dir: &Path, seed: u64, first: &str, n_days: usize) -> PathBuf {
    let ds = synth::smooth_dataset(seed, d(first), n_days);
    let mut buf = Vec::new();
    ds.write_csv(&mut buf).unwrap();
    let path = dir.join("data.csv");
    std::fs::write(&path, buf).unwrap();
    path
}

#[test]
fn ingest_writes_canonical_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let data = write_dataset(tmp.path(), 1, "2020-01-01", 10);
    let out_dir = tmp.path().join("out");
    let out = run(&[
        "ingest",
        "--data",
        data.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_exit(&out, 0);
    assert!(out_dir.join("canonical.csv").exists());
    assert!(out_dir.join("validation.json").exists());
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["command"], "ingest");
    assert!(manifest["config_hash"].as_str().unwrap().len() == 64);
    let outputs: Vec<String> = manifest["outputs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap().to_string())
        .collect();
    assert!(outputs.contains(&"canonical.csv".to_string()));
}

#[test]
fn ingest_imputes_interior_missing_day() {
    let tmp = tempfile::tempdir().unwrap();
    let data = write_dataset(tmp.path(), 2, "2020-01-01", 10);
    let text = std::fs::read_to_string(&data).unwrap();
    let filtered: String = text
        .lines()
        .filter(|l| !l.starts_with("2020-01-05"))
        .map(|l| format!("{l}\n"))
        .collect();
    std::fs::write(&data, filtered).unwrap();

    let out_dir = tmp.path().join("out");
    let out = run(&[
        "ingest",
        "--data",
        data.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_exit(&out, 0);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("validation.json")).unwrap())
            .unwrap();
    let imputed = report["imputed_days"].as_array().unwrap();
    assert_eq!(imputed.len(), 6, "one entry per series");
    assert!(imputed.iter().all(|e| e[0] == "2020-01-05"));
}

#[test]
fn ingest_boundary_gap_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let data = write_dataset(tmp.path(), 3, "2020-01-01", 6);
    let text = std::fs::read_to_string(&data).unwrap();
    let filtered: String = text
        .lines()
        .filter(|l| !(l.starts_with("2020-01-01") && l.contains(",PriceBE,")))
        .map(|l| format!("{l}\n"))
        .collect();
    std::fs::write(&data, filtered).unwrap();

    let out = run(&[
        "ingest",
        "--data",
        data.to_str().unwrap(),
        "--out",
        tmp.path().join("out").to_str().unwrap(),
    ]);
    assert_exit(&out, 2);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("impute"), "stderr: {stderr}");
}

#[test]
fn ingest_missing_file_exits_1() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&[
        "ingest",
        "--data",
        tmp.path().join("nope.csv").to_str().unwrap(),
        "--out",
        tmp.path().join("out").to_str().unwrap(),
    ]);
    assert_exit(&out, 1);
}

#[test]
fn backtest_produces_a_row_per_hour() {
    let tmp = tempfile::tempdir().unwrap();
    let data = write_dataset(tmp.path(), 4, "2020-01-01", 70);
    let out_dir = tmp.path().join("out");
    let out = run(&[
        "backtest",
        "--data",
        data.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "--from",
        "2020-02-07",
        "--to",
        "2020-03-07",
        "--window-days",
        "30",
        "--recalib-every",
        "10",
    ]);
    assert_exit(&out, 0);
    let forecasts = std::fs::read_to_string(out_dir.join("forecasts.csv")).unwrap();
    assert_eq!(forecasts.lines().next().unwrap(), "day,hour,actual,predicted");
    assert_eq!(forecasts.lines().count() - 1, 30 * 24);
    let metrics: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("metrics.json")).unwrap())
            .unwrap();
    assert_eq!(metrics["count"], 30 * 24);
    assert!(metrics["mae"].as_f64().unwrap() >= 0.0);
}

#[test]
fn backtest_outside_coverage_prints_feasible_start() {
    let tmp = tempfile::tempdir().unwrap();
    let data = write_dataset(tmp.path(), 5, "2020-01-01", 50);
    let out = run(&[
        "backtest",
        "--data",
        data.to_str().unwrap(),
        "--out",
        tmp.path().join("out").to_str().unwrap(),
        "--from",
        "2020-01-20",
        "--window-days",
        "30",
    ]);
    assert_exit(&out, 2);
    let stderr = String::from_utf8_lossy(&out.stderr);
    // window 30 + 7 lag days after 2020-01-01
    assert!(stderr.contains("2020-02-07"), "stderr: {stderr}");
}

#[test]
fn backtest_rejects_short_windows() {
    let tmp = tempfile::tempdir().unwrap();
    let data = write_dataset(tmp.path(), 6, "2020-01-01", 50);
    let out = run(&[
        "backtest",
        "--data",
        data.to_str().unwrap(),
        "--out",
        tmp.path().join("out").to_str().unwrap(),
        "--window-days",
        "10",
    ]);
    assert_exit(&out, 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("at least 30"));
}

#[test]
fn flags_override_config_file() {
    let tmp = tempfile::tempdir().unwrap();
    let data = write_dataset(tmp.path(), 7, "2020-01-01", 50);
    let config = tmp.path().join("run.toml");
    std::fs::write(
        &config,
        format!("data = {:?}\nwindow_days = 30\n", data.to_str().unwrap()),
    )
    .unwrap();
    // The flag's window (35) moves the earliest feasible start to
    // 2020-02-12; the config file's 30 would give 2020-02-07.
    let out = run(&[
        "backtest",
        "--config",
        config.to_str().unwrap(),
        "--out",
        tmp.path().join("out").to_str().unwrap(),
        "--from",
        "2020-01-20",
        "--window-days",
        "35",
    ]);
    assert_exit(&out, 2);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("2020-02-12"), "stderr: {stderr}");
}

#[test]
fn explain_writes_per_hour_reports_and_verifies() {
    let tmp = tempfile::tempdir().unwrap();
    let data = write_dataset(tmp.path(), 8, "2020-01-01", 50);
    let out_dir = tmp.path().join("out");
    let out = run(&[
        "explain",
        "--data",
        data.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "--day",
        "2020-02-10",
        "--window-days",
        "30",
        "--verify",
    ]);
    assert_exit(&out, 0);
    let attribution_files = std::fs::read_dir(&out_dir)
        .unwrap()
        .filter(|e| {
            e.as_ref()
                .unwrap()
                .file_name()
                .to_string_lossy()
                .starts_with("attribution_")
        })
        .count();
    assert_eq!(attribution_files, 24);
    assert!(out_dir.join("family_2020-02-10_h00.csv").exists());

    // Single-hour mode produces exactly one attribution file.
    let out_dir2 = tmp.path().join("out2");
    let out = run(&[
        "explain",
        "--data",
        data.to_str().unwrap(),
        "--out",
        out_dir2.to_str().unwrap(),
        "--day",
        "2020-02-10",
        "--hour",
        "13",
        "--window-days",
        "30",
    ]);
    assert_exit(&out, 0);
    assert!(out_dir2.join("attribution_2020-02-10_h13.csv").exists());
    assert!(!out_dir2.join("attribution_2020-02-10_h00.csv").exists());
}

#[test]
fn explain_outside_coverage_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let data = write_dataset(tmp.path(), 9, "2020-01-01", 50);
    let out = run(&[
        "explain",
        "--data",
        data.to_str().unwrap(),
        "--out",
        tmp.path().join("out").to_str().unwrap(),
        "--day",
        "2021-01-01",
        "--window-days",
        "30",
    ]);
    assert_exit(&out, 2);
}

#[test]
fn explain_can_reuse_a_backtest_snapshot() {
    let tmp = tempfile::tempdir().unwrap();
    let data = write_dataset(tmp.path(), 10, "2020-01-01", 50);
    let bt_dir = tmp.path().join("bt");
    let out = run(&[
        "backtest",
        "--data",
        data.to_str().unwrap(),
        "--out",
        bt_dir.to_str().unwrap(),
        "--from",
        "2020-02-07",
        "--to",
        "2020-02-09",
        "--window-days",
        "30",
        "--snapshots",
    ]);
    assert_exit(&out, 0);
    let snap = bt_dir.join("snapshots/snapshot_2020-02-07.json");
    assert!(snap.exists());

    let ex_dir = tmp.path().join("ex");
    let out = run(&[
        "explain",
        "--data",
        data.to_str().unwrap(),
        "--out",
        ex_dir.to_str().unwrap(),
        "--day",
        "2020-02-07",
        "--hour",
        "4",
        "--snapshot",
        snap.to_str().unwrap(),
        "--verify",
    ]);
    assert_exit(&out, 0);
    assert!(ex_dir.join("attribution_2020-02-07_h04.csv").exists());
}

#[test]
fn report_bundles_diagnostics() {
    let tmp = tempfile::tempdir().unwrap();
    let data = write_dataset(tmp.path(), 11, "2020-01-01", 60);
    let bt_dir = tmp.path().join("bt");
    let out = run(&[
        "backtest",
        "--data",
        data.to_str().unwrap(),
        "--out",
        bt_dir.to_str().unwrap(),
        "--from",
        "2020-02-07",
        "--to",
        "2020-02-16",
        "--window-days",
        "30",
        "--recalib-every",
        "5",
    ]);
    assert_exit(&out, 0);

    let rep_dir = tmp.path().join("rep");
    let out = run(&[
        "report",
        "--data",
        data.to_str().unwrap(),
        "--forecasts",
        bt_dir.join("forecasts.csv").to_str().unwrap(),
        "--out",
        rep_dir.to_str().unwrap(),
        "--svg",
    ]);
    assert_exit(&out, 0);
    assert!(rep_dir.join("error_vs_price.csv").exists());
    assert!(rep_dir.join("error_vs_price.svg").exists());
    let segments: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(rep_dir.join("segments.json")).unwrap())
            .unwrap();
    assert_eq!(segments["total"], 10 * 24);
    let counted: i64 = segments["segments"]
        .as_array()
        .unwrap()
        .iter()
        .map(|s| s["count"].as_i64().unwrap())
        .sum();
    assert_eq!(counted, 10 * 24);
    let scatter = std::fs::read_to_string(rep_dir.join("error_vs_price.csv")).unwrap();
    assert_eq!(scatter.lines().next().unwrap(), "actual,error");
    assert_eq!(scatter.lines().count() - 1, 10 * 24);
}

#[test]
fn report_on_empty_forecasts_exits_1() {
    let tmp = tempfile::tempdir().unwrap();
    let data = write_dataset(tmp.path(), 12, "2020-01-01", 40);
    let forecasts = tmp.path().join("forecasts.csv");
    std::fs::write(&forecasts, "day,hour,actual,predicted\n").unwrap();
    let out = run(&[
        "report",
        "--data",
        data.to_str().unwrap(),
        "--forecasts",
        forecasts.to_str().unwrap(),
        "--out",
        tmp.path().join("rep").to_str().unwrap(),
    ]);
    assert_exit(&out, 1);
}
