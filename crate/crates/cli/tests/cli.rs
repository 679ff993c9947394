use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn wslrr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wslrr")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn write_joint(dir: &Path, name: &str, k: usize, joint: &str, features: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, format!(r#"{{"K": {k}, "features": {features}, "joint": {joint}}}"#)).unwrap();
    p
}

fn binary_joint(dir: &Path) -> PathBuf {
    write_joint(dir, "bin.json", 2, "[[0.3, 0.1, 0.2], [0.05, 0.25, 0.1]]", "[[0.5], [-1.0], [2.0]]")
}

fn four_class_joint(dir: &Path) -> PathBuf {
    write_joint(
        dir,
        "four.json",
        4,
        "[[0.1, 0.05, 0.08], [0.07, 0.12, 0.03], [0.09, 0.06, 0.1], [0.04, 0.11, 0.15]]",
        "[[0.0, 1.0], [1.0, 0.0], [-1.0, 0.5]]",
    )
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn verify_passes_and_writes_report() {
    let dir = TempDir::new().unwrap();
    let j = binary_joint(dir.path());
    let out = dir.path().join("report.json");
    let o = wslrr(&["verify", "--joint", p(&j), "--scenario", "PU", "--out", p(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let report = read_json(&out);
    assert_eq!(report["pass"], Value::Bool(true));
    assert!(report["checks"].as_array().unwrap().iter().any(|c| c["name"] == "risk_equality"));
}

#[test]
fn verify_accepts_scenario_files_and_params() {
    let dir = TempDir::new().unwrap();
    let j = binary_joint(dir.path());
    let o = wslrr(&["verify", "--joint", p(&j), "--scenario", "UU", "--params", r#"{"gamma_1": 0.2, "gamma_2": 0.9}"#]);
    assert_eq!(code(&o), 0);
    let spec = dir.path().join("spec.json");
    fs::write(&spec, r#"{"name": "PU", "params": {}}"#).unwrap();
    let o = wslrr(&["verify", "--joint", p(&j), "--scenario", p(&spec)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn verify_rejects_bad_inputs() {
    let dir = TempDir::new().unwrap();
    let j = binary_joint(dir.path());
    let degenerate = wslrr(&["verify", "--joint", p(&j), "--scenario", "UU", "--params", r#"{"gamma_1": 0.5, "gamma_2": 0.5}"#]);
    assert_eq!(code(&degenerate), 2);
    let missing = wslrr(&["verify", "--joint", "/nonexistent/joint.json", "--scenario", "PU"]);
    assert_eq!(code(&missing), 2);
    let unknown = wslrr(&["verify", "--joint", p(&j), "--scenario", "XYZ"]);
    assert_eq!(code(&unknown), 2);
    let unnormalized = write_joint(dir.path(), "bad.json", 2, "[[0.3, 0.1], [0.2, 0.1]]", "[[0.0], [1.0]]");
    assert_eq!(code(&wslrr(&["verify", "--joint", p(&unnormalized), "--scenario", "PU"])), 2);
}

#[test]
fn tolerance_override_rewrites_every_check() {
    let dir = TempDir::new().unwrap();
    let j = four_class_joint(dir.path());
    let out = dir.path().join("r.json");
    let o = wslrr(&["verify", "--joint", p(&j), "--scenario", "CL", "--tol", "0", "--out", p(&out)]);
    let report = read_json(&out);
    let checks = report["checks"].as_array().unwrap();
    assert!(checks.iter().all(|c| c["tol"] == 0.0));
    for c in checks {
        let exact = c["max_abs_err"].as_f64() == Some(0.0);
        assert_eq!(c["pass"].as_bool(), Some(exact));
    }
    let all_exact = checks.iter().all(|c| c["pass"] == Value::Bool(true));
    assert_eq!(code(&o), if all_exact { 0 } else { 1 });
    assert_eq!(code(&wslrr(&["verify", "--joint", p(&j), "--scenario", "CL", "--tol", "-1"])), 2);
}

#[test]
fn simulate_pu_writes_two_channels() {
    let dir = TempDir::new().unwrap();
    let j = binary_joint(dir.path());
    let out = dir.path().join("pu.json");
    let o = wslrr(&["simulate", "--joint", p(&j), "--scenario", "PU", "--n", "P=40,U=60", "--seed", "3", "--out", p(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let ds = read_json(&out);
    let channels = ds["channels"].as_array().unwrap();
    assert_eq!(channels.len(), 2);
    let sizes: Vec<usize> = channels.iter().map(|c| c["items"].as_array().unwrap().len()).collect();
    assert_eq!(sizes, vec![40, 60]);
}

#[test]
fn simulate_is_reproducible_and_cl_covers_classes() {
    let dir = TempDir::new().unwrap();
    let j = four_class_joint(dir.path());
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for out in [&a, &b] {
        let o = wslrr(&["simulate", "--joint", p(&j), "--scenario", "CL", "--n", "500", "--seed", "9", "--out", p(out)]);
        assert_eq!(code(&o), 0);
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let ds = read_json(&a);
    let nonempty = ds["channels"].as_array().unwrap().iter().filter(|c| !c["items"].as_array().unwrap().is_empty()).count();
    assert_eq!(nonempty, 4);
}

#[test]
fn simulate_rejects_unknown_channel() {
    let dir = TempDir::new().unwrap();
    let j = binary_joint(dir.path());
    let out = dir.path().join("x.json");
    let o = wslrr(&["simulate", "--joint", p(&j), "--scenario", "PU", "--n", "Q=10", "--out", p(&out)]);
    assert_eq!(code(&o), 2);
}

#[test]
fn train_writes_model_and_trace() {
    let dir = TempDir::new().unwrap();
    let j = binary_joint(dir.path());
    let data = dir.path().join("pu.json");
    assert_eq!(code(&wslrr(&["simulate", "--joint", p(&j), "--scenario", "PU", "--n", "2000", "--out", p(&data)])), 0);
    let model = dir.path().join("m.json");
    let o = wslrr(&["train", "--data", p(&data), "--joint", p(&j), "--lr", "0.1", "--epochs", "25", "--l2", "0.01", "--out", p(&model)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let m = read_json(&model);
    assert_eq!(m["weights"].as_array().map(|w| w.len()), Some(2));
    let trace = fs::read_to_string(dir.path().join("m.trace.csv")).unwrap();
    let mut lines = trace.lines();
    assert_eq!(lines.next(), Some("epoch,risk"));
    let risks: Vec<f64> = lines.map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(risks.len(), 25);
    assert!(risks.iter().all(|r| r.is_finite()));
}

#[test]
fn soft_labels_give_a_decreasing_trace() {
    let dir = TempDir::new().unwrap();
    let j = binary_joint(dir.path());
    let data = dir.path().join("soft.json");
    assert_eq!(code(&wslrr(&["simulate", "--joint", p(&j), "--scenario", "Soft", "--n", "300", "--out", p(&data)])), 0);
    let model = dir.path().join("soft_model.json");
    let o = wslrr(&["train", "--data", p(&data), "--joint", p(&j), "--lr", "0.05", "--epochs", "30", "--out", p(&model)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let trace = fs::read_to_string(dir.path().join("soft_model.trace.csv")).unwrap();
    let risks: Vec<f64> = trace.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert!(risks.windows(2).all(|w| w[1] <= w[0] + 1e-12), "{risks:?}");
}

#[test]
fn divergent_training_exits_one() {
    let dir = TempDir::new().unwrap();
    let j = binary_joint(dir.path());
    let data = dir.path().join("pu.json");
    assert_eq!(code(&wslrr(&["simulate", "--joint", p(&j), "--scenario", "PU", "--n", "200", "--out", p(&data)])), 0);
    let model = dir.path().join("m.json");
    let o = wslrr(&["train", "--data", p(&data), "--joint", p(&j), "--lr", "1e6", "--epochs", "50", "--out", p(&model)]);
    assert_eq!(code(&o), 1);
}

#[test]
fn verify_all_small_run_and_edge_cases() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("all.json");
    let o = wslrr(&["verify-all", "--trials", "2", "--scenarios", "PU,CL,Sconf", "--out", p(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    assert_eq!(read_json(&out)["pass"], Value::Bool(true));

    let empty = dir.path().join("empty.json");
    let o = wslrr(&["verify-all", "--trials", "0", "--out", p(&empty)]);
    assert_eq!(code(&o), 0);
    assert!(read_json(&empty)["checks"].as_array().unwrap().is_empty());

    let mutated = wslrr(&["verify-all", "--trials", "1", "--scenarios", "PU", "--mutate"]);
    assert_eq!(code(&mutated), 1);
    assert_eq!(code(&wslrr(&["verify-all", "--K", "1"])), 2);
    assert_eq!(code(&wslrr(&["verify-all", "--bogus"])), 2);
}
