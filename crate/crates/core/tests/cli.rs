use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use dualfano::analysis::fano_minimum_field;
use dualfano::{Level, ModelParams};
use serde_json::{json, Value};
use tempfile::TempDir;

fn model() -> Value {
    json!({
        "gamma_f": 1.0, "gamma_1": 6.2, "gamma_2": 0.3,
        "gamma_sp_1": 17.0, "gamma_sp_2": 17.0,
        "q_1": 3.37, "q_2": 7.82,
        "detuning_1": 0.0, "detuning_2": 1.0,
        "b0": 47.97, "dmu": 1.4, "temperature": 3.5,
        "k_bg": 0.0, "intensity_ref": 1.0
    })
}

fn write_config(dir: &Path, name: &str, body: Value) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, serde_json::to_vec_pretty(&body).unwrap()).unwrap();
    path
}

fn base_config() -> Value {
    json!({
        "model": model(),
        "grids": { "field": { "start": 44.0, "stop": 52.0, "count": 40 } },
        "fixed_b": 47.97,
        "decay": { "atom_number": 2.5e5, "effective_volume": 2.5e-6, "t_max": 0.1, "count": 21, "noise_rel": 0.02 },
        "fit": { "free": ["q_1", "k_bg"] },
        "seed": 7
    })
}

fn dualfano(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dualfano")).args(args).output().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn help_exits_zero() {
    let out = dualfano(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("sweep-b"));
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    assert_eq!(dualfano(&["warp-drive"]).status.code(), Some(1));
}

#[test]
fn sweep_is_byte_identical_across_runs() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "run.json", base_config());
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for out in [&a, &b] {
        let o = dualfano(&["sweep-b", "--config", s(&cfg), "--out", s(out)]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let text = fs::read(&a).unwrap();
    assert_eq!(text, fs::read(&b).unwrap());
    assert_eq!(String::from_utf8_lossy(&text).lines().count(), 41);
}

#[test]
fn decay_is_deterministic_for_a_seed() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "run.json", base_config());
    let run = |name: &str, seed: &str| {
        let out = dir.path().join(name);
        let o = dualfano(&["decay", "--config", s(&cfg), "--out", s(&out), "--seed", seed]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        fs::read(out).unwrap()
    };
    assert_eq!(run("a.csv", "3"), run("b.csv", "3"));
    assert_ne!(run("a.csv", "3"), run("c.csv", "4"));
}

#[test]
fn malformed_config_exits_one_without_output() {
    let dir = TempDir::new().unwrap();
    let mut body = base_config();
    body["model"]["temperature"] = json!(-1.0);
    let cfg = write_config(dir.path(), "bad.json", body);
    let out = dir.path().join("never.csv");
    let o = dualfano(&["sweep-b", "--config", s(&cfg), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!out.exists());

    let junk = dir.path().join("junk.json");
    fs::write(&junk, "{ not json").unwrap();
    assert_eq!(dualfano(&["fano-min", "--config", s(&junk)]).status.code(), Some(1));
}

#[test]
fn missing_data_file_exits_four() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "run.json", base_config());
    let out = dir.path().join("fit.json");
    let missing = dir.path().join("absent.csv");
    let o = dualfano(&["fit", "--config", s(&cfg), "--data", s(&missing), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(4));
    assert!(!out.exists());
}

#[test]
fn numeric_failure_exits_two() {
    let dir = TempDir::new().unwrap();
    let mut body = base_config();
    body["grids"] = json!({ "detuning": { "start": -5.0, "stop": 5.0, "count": 11 } });
    let cfg = write_config(dir.path(), "with_b.json", body.clone());
    let data = dir.path().join("delta.csv");
    let o = dualfano(&["sweep-delta", "--config", s(&cfg), "--out", s(&data)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));

    body.as_object_mut().unwrap().remove("fixed_b");
    let cfg = write_config(dir.path(), "no_b.json", body);
    let out = dir.path().join("fit.json");
    let o = dualfano(&["fit", "--config", s(&cfg), "--data", s(&data), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(!out.exists());
}

#[test]
fn fano_min_matches_library() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "run.json", base_config());
    let out = dir.path().join("min.csv");
    let o = dualfano(&["fano-min", "--config", s(&cfg), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(0));
    let params: ModelParams = serde_json::from_value(model()).unwrap();
    let text = fs::read_to_string(&out).unwrap();
    let rows: Vec<Vec<f64>> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 2);
    for (row, level) in rows.iter().zip(Level::BOTH) {
        assert!((row[2] - fano_minimum_field(&params, level)).abs() < 1e-9);
    }
}

#[test]
fn fit_recovers_self_generated_spectrum() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "truth.json", base_config());
    let data = dir.path().join("spectrum.csv");
    assert_eq!(dualfano(&["sweep-b", "--config", s(&cfg), "--out", s(&data)]).status.code(), Some(0));

    let mut body = base_config();
    body["model"]["q_1"] = json!(3.0);
    body["model"]["k_bg"] = json!(1e-12);
    let cfg = write_config(dir.path(), "start.json", body);
    let out = dir.path().join("fit.json");
    let o = dualfano(&["fit", "--config", s(&cfg), "--data", s(&data), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let report: Value = serde_json::from_slice(&fs::read(&out).unwrap()).unwrap();
    assert_eq!(report["converged"], json!(true));
    let q_1 = report["names"].as_array().unwrap().iter().position(|n| n == "q_1").unwrap();
    assert!((report["values"][q_1].as_f64().unwrap() - 3.37).abs() < 1e-4);
}
