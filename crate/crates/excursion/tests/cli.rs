use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_excursion"));
    c.env_remove("EXCURSION_THREADS");
    c
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

const SQUARE: &str = r#"
alpha = 0.0
[model]
family = "squared_exponential_isotropic"
sigma2 = 1.0
ell = 1.0
dim = 2
[window]
kind = "cube"
side = 4.0
[grid]
n = 64
h = 0.125
[mc]
replications = 30
seed = 12
"#;

#[test]
fn predict_prints_value() {
    let dir = tempfile::tempdir().unwrap();
    let unit = SQUARE.replace("side = 4.0", "side = 1.0");
    let out = bin().args(["predict", "--config"]).arg(write_config(dir.path(), "c.toml", &unit)).output().unwrap();
    assert!(out.status.success());
    let value: f64 = stdout(&out).trim().parse().unwrap();
    assert!((value - 0.81831).abs() < 1e-5);
}

#[test]
fn config_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let unknown = write_config(dir.path(), "u.toml", &SQUARE.replace("seed = 12", "seed = 12\ncolour = 1"));
    let out = bin().args(["predict", "--config"]).arg(&unknown).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let missing = dir.path().join("missing.toml");
    assert_eq!(bin().args(["predict", "--config"]).arg(&missing).output().unwrap().status.code(), Some(2));
    let few = write_config(dir.path(), "f.toml", &SQUARE.replace("replications = 30", "replications = 0"));
    assert_eq!(bin().args(["validate", "--config"]).arg(&few).output().unwrap().status.code(), Some(2));
}

#[test]
fn validate_writes_report_and_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", SQUARE);
    let run = |threads: &str, name: &str| {
        let report = dir.path().join(name);
        let table = dir.path().join(format!("{name}.csv"));
        let status = bin()
            .args(["validate", "--threads", threads, "--config"])
            .arg(&cfg)
            .arg("--output")
            .arg(&report)
            .arg("--chi-table")
            .arg(&table)
            .output()
            .unwrap()
            .status;
        assert!(status.code() == Some(0) || status.code() == Some(4));
        (std::fs::read(report).unwrap(), std::fs::read_to_string(table).unwrap())
    };
    let (a, table) = run("1", "a.json");
    let (b, _) = run("2", "b.json");
    assert_eq!(a, b);
    assert_eq!(table.lines().count(), 31);
    let json: serde_json::Value = serde_json::from_slice(&a).unwrap();
    assert_eq!(json["replications"], 30);
    assert_eq!(json["base_seed"], 12);

    // The seed flag overrides mc.seed; the environment supplies threads.
    let out = bin().env("EXCURSION_THREADS", "2").args(["validate", "--seed", "99", "--config"]).arg(&cfg).output().unwrap();
    let json: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(json["base_seed"], 99);
    assert_eq!(json["config"]["mc"]["seed"], 99);
}

#[test]
fn acceptance_failure_exits_with_4() {
    // Vertex-rule counting at h = 2 ell is far from the continuum value.
    let dir = tempfile::tempdir().unwrap();
    let coarse = SQUARE
        .replace("alpha = 0.0", "alpha = -1.0")
        .replace("side = 4.0", "side = 8.0")
        .replace("n = 64", "n = 16")
        .replace("h = 0.125", "h = 2.0")
        .replace("replications = 30", "replications = 400")
        .replace("seed = 12", "seed = 1");
    let out = bin().args(["validate", "--config"]).arg(write_config(dir.path(), "c.toml", &coarse)).output().unwrap();
    assert_eq!(out.status.code(), Some(4));
    let json: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(json["passed"], false);
}

#[test]
fn simulate_dumps_raw_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", SQUARE);
    let raw = dir.path().join("field.bin");
    let out = bin().args(["simulate", "--seed", "4", "--config"]).arg(&cfg).arg("--dump").arg(&raw).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(std::fs::metadata(&raw).unwrap().len(), 64 * 64 * 8);
    assert!(dir.path().join("field.bin.hdr").exists());
    let json: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(json["window_points"], 33);
    assert_eq!(json["torus_points"], 128);
}

#[test]
fn density_and_flag_density() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", SQUARE);
    let out = bin().args(["density", "--flags", "1000", "--config"]).arg(&cfg).output().unwrap();
    assert!(out.status.success());
    let json: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert!((json["rows"][1]["closed_form"].as_f64().unwrap() - 0.25).abs() < 1e-14);

    let out = bin()
        .args(["flag-density", "--direction", "0.6,-0.8", "--basis", "0.8,0.6", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let q0: f64 = stdout(&out).trim().parse().unwrap();
    assert!(q0.abs() < 1e-15, "q_0 = {q0}");
    let out = bin().args(["flag-density", "--direction", "1,0", "--config"]).arg(&cfg).output().unwrap();
    let q1: f64 = stdout(&out).trim().parse().unwrap();
    assert!((q1 - 0.25).abs() < 1e-12, "q_1 = {q1}");
}
