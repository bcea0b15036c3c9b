use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn hpspec(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hpspec"))
        .args(args)
        .arg("--out")
        .arg(out)
        .arg("--quiet")
        .env_remove("HPSPEC_OUT")
        .env_remove("HPSPEC_THREADS")
        .output()
        .expect("binary runs")
}

fn run_config(sub: &str, name: &str, out: &Path) -> Output {
    let cfg = configs().join(name);
    hpspec(&[sub, "--config", cfg.to_str().unwrap()], out)
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(String::from).collect())
        .collect()
}

#[test]
fn norm_of_shipped_single_mode() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_config("norm", "norm_single_mode.json", dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    // cos(11x) on a 2π box sits where φ(2^{-3}·) = 1: B^1 norm is 2^3·√π
    let expected = 8.0 * std::f64::consts::PI.sqrt();
    let rows = csv_rows(&dir.path().join("norm.csv"));
    let blocks: Vec<(i32, f64)> = rows.iter().map(|r| (r[0].parse().unwrap(), r[1].parse().unwrap())).collect();
    let (j, top) = blocks.iter().cloned().fold((0, 0.0), |a, b| if b.1 > a.1 { b } else { a });
    assert_eq!(j, 3);
    assert!((top - expected).abs() <= 1e-8 * expected);
    assert!(blocks.iter().filter(|b| b.0 != 3).all(|b| b.1 < 1e-12));
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["exit_code"], 0);
    assert_eq!(manifest["config"]["command"], "norm");
    assert_eq!(manifest["profile_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn simulate_zero_data_gives_zero_series() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_config("simulate", "simulate_zero.json", dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = csv_rows(&dir.path().join("norms.csv"));
    assert_eq!(rows.len(), 11);
    for r in &rows {
        assert!(r[1..].iter().all(|v| v.parse::<f64>().unwrap() == 0.0), "{r:?}");
    }
    // one run: rows = samples × tracked time metrics + iteration rows
    let plot = csv_rows(&dir.path().join("plot.csv"));
    let time_rows = plot.iter().filter(|r| !r[2].ends_with("_p")).count();
    let metrics: std::collections::BTreeSet<&str> =
        plot.iter().filter(|r| !r[2].ends_with("_p")).map(|r| r[2].as_str()).collect();
    assert_eq!(time_rows, rows.len() * metrics.len());
}

#[test]
fn sweep_over_eta() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_config("sweep", "sweep_eta.json", dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    for i in 0..3 {
        assert!(dir.path().join(format!("run-{i:03}/diagnostics.json")).is_file());
    }
    let mut rows: Vec<(f64, f64)> = csv_rows(&dir.path().join("sweep.csv"))
        .iter()
        .map(|r| (r[1].parse().unwrap(), r[2].parse().unwrap()))
        .collect();
    assert_eq!(rows.len(), 3);
    rows.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    assert!(rows.windows(2).all(|w| w[1].1 > w[0].1), "T0 must increase with eta: {rows:?}");
    let ids: std::collections::BTreeSet<String> =
        csv_rows(&dir.path().join("plot.csv")).into_iter().map(|r| r[0].clone()).collect();
    assert_eq!(ids.len(), 3);
}

#[test]
fn identical_runs_are_bit_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = configs().join("simulate_barotropic_1d.json");
    let cfg = cfg.to_str().unwrap();
    assert_eq!(hpspec(&["simulate", "--config", cfg], a.path()).status.code(), Some(0));
    assert_eq!(hpspec(&["simulate", "--config", cfg, "--threads", "1"], b.path()).status.code(), Some(0));
    for f in ["norms.csv", "continuation.csv", "iterations.csv", "plot.csv", "diagnostics.json"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f} differs");
    }
}

#[test]
fn config_errors_exit_2_with_path() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(configs().join("simulate_zero.json")).unwrap();
    let bad = text.replacen("\"eta\": 0.5", "\"eta\": 0.5, \"etta\": 0.4", 1);
    let path = dir.path().join("bad.json");
    fs::write(&path, bad).unwrap();
    let out = hpspec(&["simulate", "--config", path.to_str().unwrap()], &dir.path().join("out"));
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("iteration.etta"), "{err}");

    let missing = text.replacen("\"command\": \"simulate\"", "\"command\": \"simulate\", \"norm\": {\"s\": \"x\"}", 1);
    fs::write(&path, missing).unwrap();
    let out = hpspec(&["run", "--config", path.to_str().unwrap()], &dir.path().join("out"));
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("norm.s"));
}

#[test]
fn phase_exit_aborts_with_dump() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(configs().join("simulate_zero.json")).unwrap()).unwrap();
    // density 1 + 1.5 cos x leaves the admissible range
    cfg["data"] = serde_json::json!([{"kind": "mode", "component": 0, "k": [1], "amplitude": 1.5}]);
    let path = dir.path().join("abort.json");
    fs::write(&path, cfg.to_string()).unwrap();
    let out_dir = dir.path().join("out");
    let out = hpspec(&["simulate", "--config", path.to_str().unwrap()], &out_dir);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    let dump: serde_json::Value = serde_json::from_str(&fs::read_to_string(out_dir.join("phase_abort.json")).unwrap()).unwrap();
    assert!(!dump["state"].as_array().unwrap().is_empty());
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(out_dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["exit_code"], 3);
}

#[test]
fn out_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("norm_single_mode.json");
    let out = Command::new(env!("CARGO_BIN_EXE_hpspec"))
        .args(["norm", "--quiet", "--config", cfg.to_str().unwrap()])
        .env("HPSPEC_OUT", dir.path())
        .env("HPSPEC_THREADS", "2")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(dir.path().join("norm.csv").is_file());
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    if manifest["parallel"] == true {
        assert_eq!(manifest["threads"], 2);
    }
}

#[test]
fn decompose_writes_blocks() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_config("decompose", "decompose_bump_2d.json", dir.path());
    assert_eq!(out.status.code(), Some(0));
    let rows = csv_rows(&dir.path().join("blocks.csv"));
    assert!(rows.iter().any(|r| r[0] == "homogeneous") && rows.iter().any(|r| r[0] == "nonhomogeneous"));
    assert!(dir.path().join("field.hpsf").is_file());
}
