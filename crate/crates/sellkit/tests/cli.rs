//! End-to-end checks of the command-line interface and its exit codes:
//! 0 success, 1 config error, 2 I/O or parse error.

use std::process::Command;

fn sellkit() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sellkit"))
}

#[test]
fn missing_config_file_exits_2() {
    let out = sellkit()
        .args(["run", "--config", "/nonexistent/config.json"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn empty_kinds_config_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let config = serde_json::json!({
        "kinds": [],
        "layer_dims": [[16, 16]],
        "budgets": [64],
        "train": {
            "lr0": 0.05,
            "schedule": {"Step": {"milestones": [2], "factor": 0.2}},
            "momentum": 0.9,
            "base_decay": 5e-4,
            "crs_enabled": true,
            "epochs": 2,
            "batch": 8,
            "seed": 0
        },
        "output_dir": dir.path().join("out"),
        "seed": 1
    });
    let path = dir.path().join("config.json");
    std::fs::write(&path, serde_json::to_vec(&config).unwrap()).unwrap();
    let out = sellkit().args(["run", "--config"]).arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(1), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn malformed_config_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("config.json");
    std::fs::write(&path, b"{\"kinds\": [\"Dense\",]}").unwrap();
    let out = sellkit().args(["run", "--config"]).arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn emit_plots_on_missing_results_exits_2() {
    let out = sellkit()
        .args(["emit-plots", "--results", "/nonexistent/results.json"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn emit_plots_on_corrupt_results_reports_position() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("results.json");
    std::fs::write(&path, b"[{\"kind\": }]").unwrap();
    let out = sellkit().args(["emit-plots", "--results"]).arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("line") && stderr.contains("column"), "stderr: {stderr}");
}

#[test]
fn analyze_exclusion_prints_report() {
    let out = sellkit()
        .args([
            "analyze",
            "exclusion",
            "--n-real",
            "5000",
            "--n-virtual",
            "10000",
            "--trials",
            "200",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("excluded fraction (exact)"));
    assert!(stdout.contains("monte-carlo"));
}

#[test]
fn analyze_crossover_reports_626_units() {
    let out = sellkit()
        .args(["analyze", "crossover", "--layers", "12"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("626"), "stdout: {stdout}");
}

#[test]
fn budget_solve_reports_exact_bottleneck() {
    let out = sellkit()
        .args([
            "budget", "solve", "--kind", "RankFactorised", "--dims", "256x256", "--target",
            "32768",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("params: 32768"), "stdout: {stdout}");

    // out-of-support target names the feasible interval and fails
    let out = sellkit()
        .args([
            "budget", "solve", "--kind", "RankFactorised", "--dims", "256x256", "--target", "10",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("512") && stderr.contains("131072"), "stderr: {stderr}");
}
