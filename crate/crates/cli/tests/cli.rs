use std::path::Path;
use std::process::{Command, Output};

use dinn_core::dinn::{Checkpoint, CHECKPOINT_VERSION};

fn lab(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dinn-lab")).current_dir(dir).args(args).output().expect("spawn dinn-lab")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = lab(dir, args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn models_list_and_export() {
    let tmp = tempfile::tempdir().unwrap();
    let list = ok(tmp.path(), &["models", "list"]);
    assert_eq!(list.lines().count(), 12);
    assert!(list.lines().any(|l| l == "covid_sird\tS,I,D,R"));
    ok(tmp.path(), &["models", "export", "--out", "o"]);
    let desc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("o/models/sir.json")).unwrap()).unwrap();
    assert_eq!(desc["compartments"], serde_json::json!(["S", "I", "R"]));
    assert!(!lab(tmp.path(), &["models", "show", "nope"]).status.success());
}

#[test]
fn analytic_prints_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let out = ok(tmp.path(), &["analytic", "--s0", "999", "--i0", "1", "--beta", "0.002", "--alpha", "0.5"]);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    let s = v["s_infinity"].as_f64().unwrap();
    assert!((s - 999.0 * (-0.004 * (1000.0 - s)).exp()).abs() < 1e-8);
    assert_eq!(v["ratio_beta_alpha"].as_f64().unwrap(), 0.004);
    // below threshold the peak is undefined
    assert!(!lab(tmp.path(), &["analytic", "--s0", "100", "--i0", "1", "--beta", "0.002", "--alpha", "0.5"])
        .status
        .success());
}

#[test]
fn generate_train_and_fit() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    ok(dir, &["generate", "--model", "covid_sird", "--points", "15", "--hide", "R", "--seed", "3", "--out", "d"]);
    let csv = std::fs::read_to_string(dir.join("d/covid_sird.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("t,S,I,D,R"));
    assert_eq!(csv.lines().count(), 16);
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("d/covid_sird.mask.json")).unwrap()).unwrap();
    assert_eq!(meta["hidden"], serde_json::json!(["R"]));
    let truth = std::fs::read_to_string(dir.join("d/covid_sird.truth.csv")).unwrap();
    let first_value = truth.lines().nth(1).unwrap().split(',').nth(1).unwrap();
    assert_eq!(first_value.split('e').next().unwrap().replace(['.', '-'], "").len(), 17);

    std::fs::write(dir.join("t.toml"), "iterations = 50\nhidden_layers = 2\nneurons = 4\nactivation = \"tanh\"\n")
        .unwrap();
    ok(dir, &["train", "--config", "t.toml", "--data", "d/covid_sird.csv", "--out", "tr"]);
    let ck = Checkpoint::load(&dir.join("tr/checkpoint.json")).unwrap();
    assert_eq!(ck.version, CHECKPOINT_VERSION);
    assert_eq!(ck.config.iterations, 50);
    assert_eq!(ck.model.net.layers.len(), 3);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("tr/report.json")).unwrap()).unwrap();
    assert_eq!(report["iterations"], 50);
    assert!(dir.join("tr/prediction.csv").exists());

    let fit = ok(dir, &["fit-baseline", "--data", "d/covid_sird.csv", "--method", "nelder-mead", "--out", "b"]);
    let found: serde_json::Value = serde_json::from_str(&fit).unwrap();
    assert!(found["nelder_mead"]["alpha"].as_f64().is_some());
    assert!(found.get("gauss_newton").is_none());
}

#[test]
fn bad_inputs_fail_cleanly() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let out = lab(dir, &["experiment", "bogus"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown experiment"));
    std::fs::write(dir.join("bad.toml"), "iterations = \"many\"\n").unwrap();
    assert!(!lab(dir, &["train", "--config", "bad.toml", "--data", "x.csv"]).status.success());
    assert!(!lab(dir, &["train", "--data", "missing.csv"]).status.success());
}

#[test]
fn experiment_outputs_are_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    std::fs::write(
        dir.join("s.toml"),
        "n_points = 12\npcts = [100.0]\n[train]\niterations = 40\nhidden_layers = 1\nneurons = 4\nlog_every = 10\n",
    )
    .unwrap();
    for out in ["a", "b"] {
        ok(dir, &["experiment", "range", "--config", "s.toml", "--seed", "5", "--out", out]);
    }
    for file in ["report.json", "ranges.csv", "plot_range_100.csv"] {
        let a = std::fs::read(dir.join("a/range").join(file)).unwrap();
        let b = std::fs::read(dir.join("b/range").join(file)).unwrap();
        assert_eq!(a, b, "{file} differs");
    }
    let plot = std::fs::read_to_string(dir.join("a/range/plot_range_100.csv")).unwrap();
    assert!(plot.starts_with("t,S_truth,S_pred"));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("a/range/report.json")).unwrap()).unwrap();
    assert_eq!(report["provenance"]["seed"], 5);
}
