use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn spectemp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spectemp")).args(args).output().expect("binary runs")
}

fn config(dir: &Path, body: &str) -> String {
    let path = dir.join("config.json");
    fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

const SMALL: &str = r#"{
    "dataset": {"kind": "seasonal", "periods": 8},
    "train": {"epochs": 2},
    "model": {"degree": 2, "modes": 3, "blocks": 1}
}"#;

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn missing_config_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let o = spectemp(&["train", "--config", "/nonexistent/config.json", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(!out.exists());
}

#[test]
fn unknown_axis_lists_valid_axes() {
    let dir = TempDir::new().unwrap();
    let cfg = config(dir.path(), "{}");
    let o = spectemp(&["ablate", "--config", &cfg, "--set", "ablation.axis=depth", "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("basis, structure, nonlinear"), "{}", stderr(&o));
}

#[test]
fn unknown_config_key_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let cfg = config(dir.path(), r#"{"model": {"blockz": 1}}"#);
    let o = spectemp(&["train", "--config", &cfg, "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("blockz"));
}

#[test]
fn missing_dataset_file_is_a_data_error() {
    let dir = TempDir::new().unwrap();
    let cfg = config(dir.path(), r#"{"dataset": {"kind": "csv", "path": "/nonexistent/series.csv"}}"#);
    let o = spectemp(&["train", "--config", &cfg, "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn twl_fixtures_reproduce_both_verdicts() {
    let dir = TempDir::new().unwrap();
    let cfg = config(dir.path(), "{}");
    let out = dir.path().join("twl");
    let o = spectemp(&["twl", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for f in ["merging_fixture.dtdg", "separating_fixture.dtdg", "left_colors.csv", "right_colors.csv", "manifest.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let r = json(&out.join("twl_report.json"));
    let left = &r["graphs"][0];
    assert!(left["indistinguishable_pairs"].as_array().unwrap().contains(&serde_json::json!(["A", "C"])));
    assert_eq!(r["graphs"][1]["indistinguishable_pairs"].as_array().unwrap().len(), 0);
    assert_eq!(left["self_test"], "inconclusive");
    assert_eq!(r["pair"]["verdict"], "non_isomorphic");
}

#[test]
fn malformed_dtdg_reports_its_line() {
    let dir = TempDir::new().unwrap();
    let bad = dir.path().join("bad.dtdg");
    fs::write(&bad, "3 1\n0 1\n1 x\n#\n#\n").unwrap();
    let cfg = config(dir.path(), &format!(r#"{{"twl": {{"left": {:?}}}}}"#, bad.to_str().unwrap()));
    let o = spectemp(&["twl", "--config", &cfg, "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
}

#[test]
fn train_is_deterministic_and_records_its_config() {
    let dir = TempDir::new().unwrap();
    let cfg = config(dir.path(), SMALL);
    let run = |name: &str| {
        let out = dir.path().join(name);
        let o = spectemp(&["train", "--config", &cfg, "--set", "model.basis.alpha=1.5", "--seed", "9", "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        out
    };
    let (a, b) = (run("a"), run("b"));
    assert_eq!(fs::read(a.join("metrics.json")).unwrap(), fs::read(b.join("metrics.json")).unwrap());
    assert_eq!(fs::read(a.join("checkpoint.bin")).unwrap(), fs::read(b.join("checkpoint.bin")).unwrap());
    let m = json(&a.join("metrics.json"));
    assert!(m["mae"].as_f64().unwrap() > 0.0 && m["rmse"].as_f64().unwrap() >= m["mae"].as_f64().unwrap());
    let manifest = json(&a.join("manifest.json"));
    assert_eq!(manifest["seed"], 9);
    assert_eq!(manifest["config"]["model"]["basis"]["alpha"], 1.5);
    assert_eq!(manifest["config"]["model"]["degree"], 2);
    assert_eq!(manifest["config"]["train"]["batch_size"], 32);
    assert_eq!(json(&a.join("dataset_manifest.json"))["seed"], 9);
    let history = fs::read_to_string(a.join("train_run.csv")).unwrap();
    assert_eq!(history.lines().count(), 3);
}

#[test]
fn basis_ablation_has_one_row_per_variant() {
    let dir = TempDir::new().unwrap();
    let cfg = config(dir.path(), SMALL);
    let out = dir.path().join("abl");
    let o = spectemp(&["ablate", "--config", &cfg, "--set", "ablation.repeats=2", "--set", "train.epochs=1", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let table = fs::read_to_string(out.join("ablation.csv")).unwrap();
    let rows: Vec<&str> = table.lines().skip(1).collect();
    assert_eq!(rows.len(), 5);
    assert!(rows[0].starts_with("A.1,Monomial,2,"));
    assert_eq!(fs::read_to_string(out.join("ablation_runs.csv")).unwrap().lines().count(), 1 + 10);
}

#[test]
fn theory_report_flags_bases_and_races_each() {
    let dir = TempDir::new().unwrap();
    let cfg = config(dir.path(), SMALL);
    let out = dir.path().join("theory");
    let o = spectemp(&["theory", "--config", &cfg, "--set", "theory.trials=40", "--set", "train.epochs=2", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = json(&out.join("theory_report.json"));
    let flag = |name: &str| {
        r["orthogonality"].as_array().unwrap().iter().find(|o| o["basis"] == name).unwrap()["orthogonal"].as_bool().unwrap()
    };
    assert!(!flag("monomial") && flag("gegenbauer"));
    assert!(r["column_sampling"]["violation_rate"].as_f64().unwrap() <= 0.3);
    let race = fs::read_to_string(out.join("race.csv")).unwrap();
    let mut bases: Vec<&str> = race.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    bases.dedup();
    assert_eq!(bases, ["monomial", "bernstein", "chebyshev2", "gegenbauer", "jacobi"]);
    assert_eq!(race.lines().count(), 1 + 5 * 2);
}

#[test]
fn synth_exports_embeddings_for_every_node() {
    let dir = TempDir::new().unwrap();
    let cfg = config(dir.path(), r#"{"signed": {"n_per_group": 3, "length": 200}, "train": {"epochs": 1}, "model": {"blocks": 1}}"#);
    let out = dir.path().join("synth");
    let o = spectemp(&["synth", "--config", &cfg, "--seed", "4", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for f in ["embedding_tggc.csv", "embedding_control.csv"] {
        let text = fs::read_to_string(out.join(f)).unwrap();
        let mut nodes: Vec<&str> = text.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
        nodes.dedup();
        assert_eq!(nodes.len(), 6, "{f}");
    }
    let manifest_labels = json(&out.join("dataset_manifest.json"))["labels"].clone();
    let labels: Vec<Value> = fs::read_to_string(out.join("labels.csv"))
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse::<u64>().unwrap().into())
        .collect();
    assert_eq!(Value::Array(labels), manifest_labels);
    let r = json(&out.join("synth_report.json"));
    assert_eq!(r["seed"], 4);
    assert!(r["tggc_silhouette"].as_f64().unwrap().is_finite());
}
