use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn wstate(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wstate"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("WSTATE_OUT")
        .output()
        .expect("binary runs")
}

fn report(out: &Path, command: &str) -> Value {
    let text = std::fs::read_to_string(out.join(format!("{command}_report.json"))).unwrap();
    serde_json::from_str(&text).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn ideal_w3_passes() {
    let dir = TempDir::new().unwrap();
    let o = wstate(dir.path(), &["ideal", "--n", "3"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r = report(dir.path(), "ideal");
    assert_eq!(r["passed"], true);
    assert!(r["metrics"]["fidelity"].as_f64().unwrap() > 1.0 - 1e-12);
    assert_eq!(r["inputs"]["n"], 3);
}

#[test]
fn ideal_seeded_jump_reports_theta() {
    let dir = TempDir::new().unwrap();
    let o = wstate(dir.path(), &["ideal", "--n", "12", "--q", "3"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let theta = report(dir.path(), "ideal")["metrics"]["jump"]["theta"].as_f64().unwrap();
    assert!((theta - std::f64::consts::PI).abs() < 1e-12);
}

#[test]
fn infeasible_jump_fails() {
    let dir = TempDir::new().unwrap();
    let o = wstate(dir.path(), &["ideal", "--n", "5", "--q", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("jump infeasible"));
    let r = report(dir.path(), "ideal");
    assert_eq!(r["passed"], false);
    assert!(r["error"].as_str().unwrap().contains("n <= 4q"));
}

#[test]
fn evolve_writes_full_precision_trace() {
    let dir = TempDir::new().unwrap();
    let o = wstate(dir.path(), &["evolve", "--n", "3"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(dir.path().join("evolve_trace.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "m,diag_1,diag_2,diag_3,diag_product,fidelity,trace");
    let row: Vec<&str> = lines.nth(1).unwrap().split(',').collect();
    assert_eq!(row[0], "1");
    // d.dddddddddddddddde±x: 17 significant digits
    let mantissa = row[1].split('e').next().unwrap();
    assert_eq!(mantissa.chars().filter(|c| c.is_ascii_digit()).count(), 17);

    let r = report(dir.path(), "evolve");
    assert_eq!(r["passed"], true);
    let rel = r["metrics"]["peak_relative_deviation"].as_f64().unwrap();
    assert!(rel < 0.01, "{rel}");
    assert!(r["metrics"]["fidelity"].as_f64().unwrap() >= 0.999);
}

#[test]
fn evolve_without_exchange_stalls() {
    let dir = TempDir::new().unwrap();
    let o = wstate(dir.path(), &["evolve", "--n", "3", "--omega", "0"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("no maximum"), "{}", stderr(&o));
    let r = report(dir.path(), "evolve");
    assert!(r["metrics"]["stalled_after"].as_u64().unwrap() <= 1000);
    assert!(dir.path().join("evolve_flip_trace.csv").exists());
}

#[test]
fn sweep_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let o = wstate(dir.path(), &["sweep", "--points", "8"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let first = std::fs::read(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(String::from_utf8_lossy(&first).lines().count(), 65);
    let o = wstate(dir.path(), &["sweep", "--points", "8"]);
    assert!(o.status.success());
    assert_eq!(first, std::fs::read(dir.path().join("sweep.csv")).unwrap());
    let r = report(dir.path(), "sweep");
    assert!(r["metrics"]["argmin"]["fom"].as_f64().unwrap().is_finite());
}

#[test]
fn sweep_single_point() {
    let dir = TempDir::new().unwrap();
    let o = wstate(dir.path(), &["sweep", "--points", "1", "--x-range", "pi:pi", "--y-range", "pi/2:pi/2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(text.lines().count(), 2);
}

#[test]
fn degenerate_sweep_fails() {
    let dir = TempDir::new().unwrap();
    let o = wstate(dir.path(), &["sweep", "--points", "2", "--omega", "0"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("degenerate"));
    assert!(dir.path().join("sweep.csv").exists());
}

#[test]
fn schedule_json_round_trips() {
    let dir = TempDir::new().unwrap();
    let o = wstate(dir.path(), &["schedule", "--n", "64", "--strategy", "max-forward"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let plan: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("schedule.json")).unwrap()).unwrap();
    let sizes: Vec<u64> = plan["stages"].as_array().unwrap().iter().map(|s| s["n"].as_u64().unwrap()).collect();
    assert_eq!(sizes, vec![4, 16, 64]);
    assert_eq!(plan["strategy"], "max-forward");
}

#[test]
fn unknown_strategy_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let o = wstate(dir.path(), &["schedule", "--strategy", "sideways"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn verify_fast_and_injection() {
    let dir = TempDir::new().unwrap();
    let o = wstate(dir.path(), &["verify", "--fast"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r = report(dir.path(), "verify");
    let skipped: Vec<&str> = r["checks"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|c| c["skipped"] == true)
        .map(|c| c["name"].as_str().unwrap())
        .collect();
    assert_eq!(skipped, vec!["full-space-n5"]);

    let o = wstate(dir.path(), &["verify", "--fast", "--inject", "trace-positivity"]);
    assert_eq!(o.status.code(), Some(1));
    let r = report(dir.path(), "verify");
    let failed: Vec<&str> = r["checks"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|c| c["passed"] == false)
        .map(|c| c["name"].as_str().unwrap())
        .collect();
    assert_eq!(failed, vec!["trace-positivity"]);

    let o = wstate(dir.path(), &["verify", "--fast", "--inject", "no-such-check"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn config_file_then_flags() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("run.ini");
    std::fs::write(&cfg, "[run]\nexperiment = w-five\nn = 5\nq = 2\nkd = pi\nstrategy = max-forward\n").unwrap();
    let o = wstate(dir.path(), &["ideal", "--config", cfg.to_str().unwrap(), "--n", "8"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r = report(dir.path(), "ideal");
    assert_eq!(r["experiment"], "w-five");
    assert_eq!(r["inputs"]["n"], 8);
    assert_eq!(r["inputs"]["q"], 2);
    assert_eq!(r["inputs"]["strategy"], "max-forward");

    std::fs::write(&cfg, "colour = red\n").unwrap();
    let o = wstate(dir.path(), &["ideal", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("colour"));
}

#[test]
fn output_dir_from_environment() {
    let dir = TempDir::new().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_wstate"))
        .args(["schedule", "--n", "4"])
        .env("WSTATE_OUT", dir.path())
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(dir.path().join("schedule.json").exists());
    assert!(dir.path().join("schedule_report.json").exists());
}

#[test]
fn fidelity_curve_leaves_small_n_blank() {
    let dir = TempDir::new().unwrap();
    let o = wstate(dir.path(), &["fidelity-curve", "--n", "5"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(dir.path().join("fidelity_curve.csv")).unwrap();
    let rows: Vec<Vec<&str>> = text.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[1][0], "3");
    assert_eq!(rows[1][2], "");
    assert!(!rows[2][2].is_empty());
}

#[test]
fn electron_table() {
    let dir = TempDir::new().unwrap();
    let o = wstate(dir.path(), &["electrons", "--q", "2", "--n", "5"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(dir.path().join("electrons.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "n,J_eff,N_sim_entangle,N_est_entangle,N_sim_phase,N_est_phase");
    assert_eq!(lines.count(), 3);

    let o = wstate(dir.path(), &["electrons", "--q", "2", "--n", "9"]);
    assert_eq!(o.status.code(), Some(2));
}
