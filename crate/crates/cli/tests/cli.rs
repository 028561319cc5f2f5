use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};

fn cubicavoid(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cubicavoid")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, cfg: &Value) -> String {
    let path = dir.join(name);
    fs::write(&path, serde_json::to_string_pretty(cfg).unwrap()).unwrap();
    path.to_str().unwrap().to_string()
}

fn run(dir: &Path, cfg: &Value, out: &str) -> Output {
    let config = write_config(dir, &format!("{out}.json"), cfg);
    let out = dir.join(out);
    cubicavoid(&["run", "--config", &config, "--out", out.to_str().unwrap()])
}

fn csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    (header, rows)
}

fn num(cell: &str) -> f64 {
    cell.parse().unwrap()
}

fn report(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

fn hermite_ivp() -> Value {
    json!({
        "group": {"kind": "abelian", "n": 1},
        "interval": {"a": 0.0, "b": 1.0, "nodes": 64},
        "initial": {"g_a": [0.0], "xi0": [0.0], "xi1": [6.0], "xi2": [-12.0]},
        "mode": "ivp"
    })
}

fn so3_bump_check() -> Value {
    json!({
        "group": {"kind": "so3", "inertia": [1.0, 2.0, 3.0]},
        "potential": {"shape": "gaussian_bump", "params": {"tau": 8.0, "sigma2": 0.5}, "obstacle": [0.05, 0.1, -0.05]},
        "interval": {"a": 0.0, "b": 3.0, "nodes": 150},
        "initial": {"g_a": [0.0, 0.0, 0.0], "xi0": [0.2, 0.1, -0.06], "xi1": [0.0, 0.0, 0.0], "xi2": [0.0, 0.0, 0.0]},
        "mode": "check"
    })
}

#[test]
fn ivp_reproduces_the_hermite_cubic() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &hermite_ivp(), "ivp");
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = csv(&dir.path().join("ivp/trajectory.csv"));
    assert_eq!(header, ["t", "x1", "xi0_1", "xi1_1", "xi2_1", "V", "d"]);
    assert_eq!(rows.len(), 65);
    for row in &rows {
        let t = num(&row[0]);
        assert!((num(&row[1]) - (3.0 * t * t - 2.0 * t * t * t)).abs() < 1e-12);
        assert!((num(&row[2]) - (6.0 * t - 6.0 * t * t)).abs() < 1e-12);
    }
    assert!(!dir.path().join("ivp/scan.csv").exists());
    assert_eq!(report(&dir.path().join("ivp"))["status"], "ok");
}

#[test]
fn bvp_recovers_the_hermite_jets() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = json!({
        "group": {"kind": "abelian", "n": 1},
        "interval": {"a": 0.0, "b": 1.0, "nodes": 64},
        "boundary": {"g_a": [0.0], "xi0_a": [0.0], "g_b": [1.0], "xi0_b": [0.0]},
        "mode": "bvp"
    });
    let out = run(dir.path(), &cfg, "bvp");
    assert_eq!(out.status.code(), Some(0));
    let bvp = &report(&dir.path().join("bvp"))["bvp"];
    assert!((bvp["xi1"][0].as_f64().unwrap() - 6.0).abs() < 1e-8);
    assert!((bvp["xi2"][0].as_f64().unwrap() + 12.0).abs() < 1e-8);
}

#[test]
fn check_on_free_euclidean_cubic() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = hermite_ivp();
    cfg["mode"] = json!("check");
    let out = run(dir.path(), &cfg, "check");
    assert_eq!(out.status.code(), Some(0));
    let rep = report(&dir.path().join("check"));
    assert_eq!(rep["verdict"], "OmegaLocalMinimizer");
    assert!(rep["detections"].as_array().unwrap().is_empty());
    let (header, rows) = csv(&dir.path().join("check/scan.csv"));
    assert_eq!(header, ["t", "det", "sv_ratio"]);
    for row in rows.iter().skip(1) {
        let t = num(&row[0]);
        let expected = t.powi(4) / 12.0;
        assert!((num(&row[1]) - expected).abs() <= 1e-9 * expected);
    }
}

#[test]
fn so3_trajectory_has_matrix_columns() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &so3_bump_check(), "so3");
    assert_eq!(out.status.code(), Some(0));
    let (header, rows) = csv(&dir.path().join("so3/trajectory.csv"));
    assert_eq!(header.len(), 1 + 9 + 9 + 2);
    assert_eq!(&header[1..4], ["g11", "g12", "g13"]);
    assert!(rows.iter().all(|r| r.len() == header.len()));
    let rep = report(&dir.path().join("so3"));
    assert_eq!(rep["verdict"], "NotMinimizer");
    assert_eq!(rep["detections"].as_array().unwrap().len(), 2);
}

#[test]
fn coarse_grid_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = hermite_ivp();
    cfg["interval"]["nodes"] = json!(4);
    let out = run(dir.path(), &cfg, "coarse");
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("interval.nodes"));
}

#[test]
fn malformed_field_is_reported_by_path() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = hermite_ivp();
    cfg["initial"]["xi1"] = json!("six");
    let out = run(dir.path(), &cfg, "malformed");
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("initial.xi1"));
}

#[test]
fn echoed_config_reproduces_outputs_bit_for_bit() {
    let dir = tempfile::tempdir().unwrap();
    let first = run(dir.path(), &so3_bump_check(), "first");
    assert_eq!(first.status.code(), Some(0));
    let rep = report(&dir.path().join("first"));
    let second = run(dir.path(), &rep["config"], "second");
    assert_eq!(second.status.code(), Some(0));
    for file in ["trajectory.csv", "scan.csv"] {
        let a = fs::read(dir.path().join("first").join(file)).unwrap();
        let b = fs::read(dir.path().join("second").join(file)).unwrap();
        assert!(a == b, "{file} differs");
    }
    assert_eq!(rep["config_hash"], report(&dir.path().join("second"))["config_hash"]);
}

#[test]
fn flags_are_folded_into_the_echo() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "flags.json", &hermite_ivp());
    let out = dir.path().join("flags");
    let status = cubicavoid(&[
        "run",
        "--config",
        &config,
        "--out",
        out.to_str().unwrap(),
        "--mode",
        "check",
        "--tol-scale",
        "10",
        "--seed",
        "7",
    ]);
    assert_eq!(status.status.code(), Some(0));
    let rep = report(&out);
    assert_eq!(rep["config"]["mode"], "check");
    assert_eq!(rep["config"]["tolerances"]["seed"], 7);
    assert!((rep["config"]["tolerances"]["detect_rel_tol"].as_f64().unwrap() - 1e-7).abs() < 1e-20);
}

#[test]
fn zero_strength_sweep_matches_the_free_check() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = so3_bump_check();
    let config = write_config(dir.path(), "sweep.json", &cfg);
    let out = dir.path().join("sweep");
    let status = cubicavoid(&[
        "sweep",
        "--config",
        &config,
        "--param",
        "potential.params.tau",
        "--values",
        "0",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(status.status.code(), Some(0), "{}", String::from_utf8_lossy(&status.stderr));

    let mut free = cfg.clone();
    free["potential"] = json!({"shape": "zero", "obstacle": [0.05, 0.1, -0.05]});
    assert_eq!(run(dir.path(), &free, "free").status.code(), Some(0));
    let rep = report(&dir.path().join("free"));

    let (header, rows) = csv(&out.join("sweep.csv"));
    assert_eq!(header, ["value", "verdict", "first_biconjugate", "min_sv_ratio"]);
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0][1], rep["verdict"].as_str().unwrap());
    assert_eq!(rows[0][2], "");
    assert_eq!(num(&rows[0][3]), rep["min_sv_ratio"].as_f64().unwrap());
    let a = fs::read(out.join("value_000/scan.csv")).unwrap();
    let b = fs::read(dir.path().join("free/scan.csv")).unwrap();
    assert!(a == b);
}

#[test]
fn short_so3_arc_stays_minimal_for_small_strengths() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = json!({
        "group": {"kind": "so3", "inertia": [1.0, 2.0, 3.0]},
        "potential": {"shape": "gaussian_bump", "params": {"tau": 0.0, "sigma2": 0.5}, "obstacle": [0.05, 0.1, -0.05]},
        "interval": {"a": 0.0, "b": 0.5, "nodes": 64},
        "boundary": {"g_a": [0.0, 0.0, 0.0], "xi0_a": [0.2, 0.1, -0.06], "g_b": [0.1, 0.05, -0.03], "xi0_b": [0.2, 0.1, -0.06]},
        "mode": "sweep",
        "sweep": {"parameter": "potential.params.tau", "values": [0.0, 0.25, 0.5, 1.0]}
    });
    let out = run(dir.path(), &cfg, "short");
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let (_, rows) = csv(&dir.path().join("short/sweep.csv"));
    assert_eq!(rows.len(), 4);
    for row in &rows {
        assert_eq!(row[1], "OmegaLocalMinimizer");
        assert_eq!(row[2], "");
    }
    for i in 0..4 {
        assert!(dir.path().join(format!("short/value_{i:03}/report.json")).exists());
    }
}

#[test]
fn unresolved_sweep_parameter_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "bad.json", &so3_bump_check());
    let out = dir.path().join("bad");
    let status = cubicavoid(&[
        "sweep",
        "--config",
        &config,
        "--param",
        "potential.params.kappa",
        "--values",
        "1,2",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(status.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&status.stderr).contains("potential.params.kappa"));
}

#[test]
fn numerical_failure_is_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = json!({
        "group": {"kind": "so3"},
        "potential": {"shape": "quadratic", "params": {"tau": 1e-9}},
        "interval": {"a": 0.0, "b": 1.0, "nodes": 40},
        "initial": {"g_a": [0.0, 0.0, 0.0], "xi0": [0.0, 0.0, std::f64::consts::PI], "xi1": [0.0, 0.0, 0.0], "xi2": [0.0, 0.0, 0.0]},
        "mode": "check"
    });
    let out = run(dir.path(), &cfg, "fail");
    assert_eq!(out.status.code(), Some(3));
    let rep = report(&dir.path().join("fail"));
    assert_eq!(rep["status"], "failed");
    assert_eq!(rep["failure"]["kind"], "CutLocusDuringIntegration");
    assert!(rep["failure"]["t"].as_f64().unwrap() > 0.5);
}
