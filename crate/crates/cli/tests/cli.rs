use std::process::{Command, Output};

use fitdae::linsolve::read_matrix_market;
use serde_json::Value;

fn fitdae(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fitdae")).args(args).output().expect("binary runs")
}

fn error_json(out: &Output) -> Value {
    assert!(!out.status.success());
    serde_json::from_slice(&out.stderr).expect("stderr holds one JSON object")
}

#[test]
fn simulate_writes_csv_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("out.csv");
    let summary = dir.path().join("out.json");
    let out = fitdae(&[
        "simulate",
        "--scene",
        "index-reference",
        "--output",
        csv.to_str().unwrap(),
        "--summary",
        summary.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    let header: Vec<&str> = text.lines().next().unwrap().split(',').collect();
    assert_eq!(header[0], "t");
    assert!(header.contains(&"E_mag"));
    assert_eq!(text.lines().count(), 12);
    let s: Value = serde_json::from_str(&std::fs::read_to_string(&summary).unwrap()).unwrap();
    assert_eq!(s["scene"], "index-reference");
    assert_eq!(s["index_probe"]["index"], 1);
    assert!(s["extrema"]["E_mag"]["max"].as_f64().unwrap() >= 0.0);
}

#[test]
fn simulate_accepts_a_scene_file_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let scene = dir.path().join("scene.json");
    let out = fitdae(&["scene", "export", "index-reference", "--output", scene.to_str().unwrap()]);
    assert!(out.status.success());
    let out = fitdae(&[
        "simulate",
        "--scene",
        scene.to_str().unwrap(),
        "--formulation",
        "aphi-coulomb",
        "--dt",
        "0.02",
        "--t-end",
        "0.1",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 7);
    let s: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(s["formulation"], "aphi-coulomb");
    assert_eq!(s["index_probe"]["index"], 2);
    assert_eq!(s["steps"], 5);
}

#[test]
fn analyze_index_reports_the_reference_table() {
    let out = fitdae(&["analyze-index", "--scene", "index-reference", "--formulation", "aphi-lorenz,aphi-coulomb,eqs"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let indices: Vec<u64> = v["results"].as_array().unwrap().iter().map(|r| r["report"]["index"].as_u64().unwrap()).collect();
    assert_eq!(indices, [1, 2, 0]);
}

#[test]
fn analyze_index_skips_unsupported_formulations_when_listing_all() {
    let out = fitdae(&["analyze-index", "--scene", "index-reference"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let results = v["results"].as_array().unwrap();
    assert!(results.iter().any(|r| r["formulation"] == "fullwave-eh" && r["skipped"].is_string()));
    assert!(results.iter().any(|r| r["formulation"] == "mqs-tomega" && r["report"]["index"] == 1));
}

#[test]
fn export_operators_round_trips_through_matrix_market() {
    let dir = tempfile::tempdir().unwrap();
    let out = fitdae(&[
        "export-operators",
        "--scene",
        "index-reference",
        "--formulation",
        "aphi-lorenz",
        "--format",
        "matrixmarket",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let info: Value = serde_json::from_slice(&out.stdout).unwrap();
    let n = info["dofs"].as_u64().unwrap() as usize;
    for name in ["M", "K"] {
        let file = std::fs::File::open(dir.path().join(format!("{name}.mtx"))).unwrap();
        let a = read_matrix_market(std::io::BufReader::new(file)).unwrap();
        assert_eq!(a.shape(), (n, n));
        assert!(a.nnz() > 0);
    }
}

#[test]
fn scene_list_names_every_builtin() {
    let out = fitdae(&["scene", "list"]);
    let text = String::from_utf8(out.stdout).unwrap();
    for id in fitdae::bench::BUILTIN_IDS {
        assert!(text.lines().any(|l| l == id));
    }
}

#[test]
fn failures_exit_nonzero_with_error_json() {
    let e = error_json(&fitdae(&["simulate", "--scene", "no-such-scene"]));
    assert_eq!(e["error"], "SceneNotFound");
    let e = error_json(&fitdae(&["simulate", "--scene", "index-reference", "--formulation", "bogus"]));
    assert_eq!(e["error"], "InvalidSpec");
    let e = error_json(&fitdae(&["simulate", "--scene", "copper-bar", "--formulation", "fullwave-eh", "--t-end", "1e-3"]));
    assert_eq!(e["error"], "FormulationMisuse");
    assert!(e["message"].as_str().unwrap().contains("copper-bar"));
    let e = error_json(&fitdae(&["simulate", "--scene", "index-reference", "--dt=-1"]));
    assert_eq!(e["error"], "InvalidSpec");
}
