use std::fs;
use std::process::Command;

use heom_dpt::cli::{parse_config_str, read_results, run};

const CONFIG: &str = r#"{
    "model": {"name": "lmg", "params": {"gamma": 1, "kappa": 1, "omega": 1}},
    "sizes": [4],
    "k_max": 3,
    "sweep": {"param": "g", "values": [0.3, 0.6]},
    "analyses": ["steady_state", "gap", "decompose", "sectors", "properties"],
    "observables": ["Sz", "Sx"]
}"#;

#[test]
fn sweep_writes_merged_results_and_resumes() {
    let dir = tempfile::tempdir().unwrap();
    let config = parse_config_str(CONFIG, dir.path()).unwrap();
    let out = dir.path().join("out");
    let first = run(&config, &out, 2).unwrap();
    assert!(first.failures.is_empty(), "{:?}", first.failures);
    assert_eq!(first.resumed_points, 0);

    let text = fs::read_to_string(&first.results_path).unwrap();
    assert!(text.starts_with("# heom-dpt results"));
    assert!(text.contains(&format!("# config_sha256: {}", config.hash())));
    assert!(text.contains("run_id,model,N,k_max,sweep_param,sweep_value,analysis,key,re_value,im_value"));

    let rows = read_results(&first.results_path).unwrap();
    assert_eq!(rows, first.rows);
    for value in [0.3, 0.6] {
        let at = |key: &str| rows.iter().find(|r| r.sweep_value == value && r.key == key).unwrap();
        assert_eq!(at("Sz").analysis, "steady_state");
        assert!(at("Sz").re_value.abs() <= 2.0);
        assert!(at("Sz").im_value.abs() < 1e-9);
        assert!(at("lambda_1").re_value < 0.0);
        assert!(at("off_sector_residual").re_value < 1e-12);
        assert!(at("sector[0].lambda_0").re_value.abs() < 1e-9);
        assert!(at("max_physical_trace").re_value < 1e-9);
    }

    // Second run reuses every checkpoint and reproduces the file byte for byte.
    let second = run(&config, &out, 1).unwrap();
    assert_eq!(second.resumed_points, 2);
    assert_eq!(fs::read_to_string(&second.results_path).unwrap(), text);
}

#[test]
fn failing_analysis_is_recorded_and_not_checkpointed() {
    let dir = tempfile::tempdir().unwrap();
    let text = CONFIG
        .replace("\"k_max\": 3", "\"k_max\": \"auto\", \"k_start\": 1, \"k_limit\": 2, \"epsilon\": 1e-14")
        .replace("[\"steady_state\", \"gap\", \"decompose\", \"sectors\", \"properties\"]", "[\"gap\"]");
    let config = parse_config_str(&text, dir.path()).unwrap();
    let summary = run(&config, &dir.path().join("out"), 1).unwrap();
    assert_eq!(summary.failures.len(), 2);
    assert_eq!(summary.exit_code(), 1);
    assert!(summary.failures.iter().all(|f| f.analysis == "setup"));
    assert!(dir.path().join("out/failures.csv").exists());
    let checkpoints = fs::read_dir(dir.path().join("out/checkpoints")).unwrap().next().unwrap().unwrap().path();
    assert_eq!(fs::read_dir(checkpoints).unwrap().count(), 0);
}

#[test]
fn binary_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bin = env!("CARGO_BIN_EXE_heom-dpt");

    let bad = dir.path().join("bad.json");
    fs::write(&bad, CONFIG.replace("\"k_max\": 3", "\"k_max\": -1")).unwrap();
    let status = Command::new(bin).arg("--config").arg(&bad).arg("--out").arg(dir.path().join("o1")).status().unwrap();
    assert_eq!(status.code(), Some(2));

    let good = dir.path().join("good.json");
    fs::write(&good, CONFIG.replace("[0.3, 0.6]", "[0.3]").replace("\"k_max\": 3", "\"k_max\": 2")).unwrap();
    let out = dir.path().join("o2");
    let status = Command::new(bin).arg("--config").arg(&good).arg("--out").arg(&out).arg("--workers").arg("1").status().unwrap();
    assert_eq!(status.code(), Some(0));
    assert!(out.join("results.csv").exists());
}

#[test]
fn row_count_contract() {
    let dir = tempfile::tempdir().unwrap();
    let text = CONFIG
        .replace("[0.3, 0.6]", "[0.2, 0.5, 0.8]")
        .replace("[\"steady_state\", \"gap\", \"decompose\", \"sectors\", \"properties\"]", "[\"steady_state\", \"gap\"]")
        .replace("[\"Sz\", \"Sx\"]", "[\"Sz\"]");
    let config = parse_config_str(&text, dir.path()).unwrap();
    let summary = run(&config, &dir.path().join("out"), 1).unwrap();
    let count = |analysis: &str| summary.rows.iter().filter(|r| r.analysis == analysis).count();
    assert_eq!(count("steady_state"), 3);
    assert_eq!(count("gap"), 3);
    assert_eq!(summary.rows.len(), 6);
}

#[test]
fn failing_point_leaves_other_rows() {
    let dir = tempfile::tempdir().unwrap();
    let text = CONFIG
        .replace("\"kappa\": 1, ", "")
        .replace("\"param\": \"g\", \"values\": [0.3, 0.6]", "\"param\": \"kappa\", \"values\": [1.0, -1.0, 2.0]")
        .replace("\"gamma\": 1,", "\"gamma\": 1, \"g\": 0.4,");
    let config = parse_config_str(&text, dir.path()).unwrap();
    let summary = run(&config, &dir.path().join("out"), 2).unwrap();
    assert_eq!(summary.failures.len(), 1);
    assert_eq!(summary.failures[0].sweep_value, -1.0);
    for kappa in [1.0, 2.0] {
        assert!(summary.rows.iter().any(|r| r.sweep_value == kappa && r.key == "lambda_1"));
    }
    assert!(summary.rows.iter().all(|r| r.sweep_value != -1.0));
}
