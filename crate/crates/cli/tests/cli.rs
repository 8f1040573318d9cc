//! Runs the `postdp` binary end to end on a tiny configuration.

use std::path::Path;
use std::process::{Command, Output};

fn postdp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_postdp")).args(args).output().expect("spawn postdp")
}

fn ok(args: &[&str]) -> Output {
    let out = postdp(args);
    assert!(out.status.success(), "postdp {args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

const TINY: &str = r#"{
  "dataset": {
    "type": "synthetic",
    "num_classes": 3,
    "feature_dim": 4,
    "cluster_spread": 0.8,
    "pretrain_records": 60,
    "finetune_records": 30,
    "holdout_records": 30,
    "seed": 1
  },
  "pretrain": { "hidden_dims": [8], "epochs": 20, "learning_rate": 0.5, "seed": 0, "init_scale": 1.0 },
  "finetune": { "epochs": 40, "learning_rate": 0.5, "seed": 0, "init_scale": 1.0 },
  "mechanisms": ["logistic", "laplace", "gaussian"],
  "epsilon_grid": { "type": "halving", "anchor_scale": 0.05, "points": 3 },
  "sensitivity": { "type": "sampled", "m": 5, "seed": 0 },
  "repeats": 2,
  "master_seed": 9,
  "attack": { "hidden_layers": 1, "hidden_width": 8, "epochs": 3, "train_pairs": 20 }
}"#;

fn tiny_config(dir: &Path) -> String {
    let path = dir.join("tiny.json");
    std::fs::write(&path, TINY).unwrap();
    path.to_str().unwrap().to_string()
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_string()
}

#[test]
fn sample_writes_one_value_per_line() {
    let out = ok(&["sample", "--mechanism", "logistic", "--scale", "0.5", "-n", "25", "--seed", "3"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "value");
    assert_eq!(lines.len(), 26);
    assert!(lines[1..].iter().all(|l| l.parse::<f64>().unwrap().is_finite()));
    let again = ok(&["sample", "--mechanism", "logistic", "--scale", "0.5", "-n", "25", "--seed", "3"]);
    assert_eq!(text.as_bytes(), again.stdout.as_slice());
}

#[test]
fn errors_exit_nonzero() {
    assert!(!postdp(&["sweep", "--config", "/nonexistent.json", "--out", "/tmp/x.json"]).status.success());
    assert!(!postdp(&["sample", "--mechanism", "cauchy", "--scale", "1"]).status.success());
    assert!(!postdp(&["sample", "--mechanism", "laplace", "--scale", "-1"]).status.success());
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, TINY.replace("\"repeats\": 2", "\"repeats\": 0")).unwrap();
    let out = postdp(&["sweep", "--config", bad.to_str().unwrap(), "--out", &path(dir.path(), "r.json")]);
    assert!(!out.status.success());
}

#[test]
fn protect_then_attack() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let model = path(dir.path(), "model");
    ok(&["protect", "--config", &cfg, "--mechanism", "laplace", "--epsilon", "1.0", "--out", &model]);
    for f in ["theta.weights", "omega.weights", "release.json"] {
        assert!(dir.path().join("model").join(f).exists(), "missing {f}");
    }
    let result = path(dir.path(), "attack.json");
    let records = path(dir.path(), "attack.csv");
    ok(&["attack", "--config", &cfg, "--model", &model, "--attack-data", &records, "--out", &result]);
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&result).unwrap()).unwrap();
    let acc = v["mia_accuracy"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&acc));
    assert_eq!(v["members"], 30);
    assert_eq!(std::fs::read_to_string(&records).unwrap().lines().count(), 21);
}

#[test]
fn sensitivity_writes_an_estimate() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let out = path(dir.path(), "sens.json");
    ok(&["sensitivity", "--config", &cfg, "--m", "4", "--out", &out]);
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["m"], 4);
    assert!(v["delta_l1"].as_f64().unwrap() >= v["delta_l2"].as_f64().unwrap());
}

#[test]
fn sweep_and_report_formats() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let report = path(dir.path(), "report.json");
    ok(&["sweep", "--config", &cfg, "--out", &report, "--seed", "5"]);
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(v["config"]["master_seed"], 5);
    assert_eq!(v["rows"].as_array().unwrap().len(), 18);

    let rows = ok(&["report", "--input", &report, "--format", "csv"]);
    assert_eq!(String::from_utf8(rows.stdout).unwrap().lines().count(), 19);
    let summary = ok(&["report", "--input", &report, "--format", "summary"]);
    assert_eq!(String::from_utf8(summary.stdout).unwrap().lines().count(), 10);
    let trends = ok(&["report", "--input", &report, "--format", "trends"]);
    let t: serde_json::Value = serde_json::from_slice(&trends.stdout).unwrap();
    assert_eq!(t.as_array().unwrap().len(), 3);
    let json = path(dir.path(), "copy.json");
    ok(&["report", "--input", &report, "--format", "json", "--out", &json]);
    assert_eq!(std::fs::read(&json).unwrap(), std::fs::read(&report).unwrap());
}
