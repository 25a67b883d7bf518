use std::path::Path;
use std::process::{Command, Output};

fn shl(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_shl"))
        .args(args)
        .env("SHL_OUTPUT_DIR", dir)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn json(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stdout).expect("stdout is JSON")
}

#[test]
fn exponents_prints_json_and_writes_file() {
    let dir = tempfile::tempdir().unwrap();
    let o = shl(dir.path(), &["exponents", "--n", "11", "--p", "7"]);
    assert_eq!(code(&o), 0);
    let v = json(&o);
    assert!((v["sigma"].as_f64().unwrap() - 13.0 / 3.0).abs() < 1e-12);
    assert!((v["lambda"].as_f64().unwrap() - 182.0 / 9.0).abs() < 1e-12);
    assert!(dir.path().join("exponents_n11_p7.json").exists());
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&shl(dir.path(), &["linear-decay", "--ell", "8"])), 2);
    assert_eq!(code(&shl(dir.path(), &["exponents", "--frobnicate"])), 2);
    assert_eq!(code(&shl(dir.path(), &["exponents", "--set", "grid.bogus=1"])), 2);
    assert_eq!(code(&shl(dir.path(), &["exponents", "--config", "/nonexistent/shl.ini"])), 2);
    // below the Hardy threshold for n = 11
    assert_eq!(code(&shl(dir.path(), &["exponents", "--n", "11", "--p", "3"])), 2);
}

#[test]
fn passing_run_exits_zero_and_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let o = shl(dir.path(), &["linear-decay", "--ell", "5", "--b", "0.1"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("PASS"));
    let names: Vec<String> =
        std::fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    for suffix in ["_report.json", "_series.csv", "_meta.json"] {
        assert!(names.iter().any(|n| n.ends_with(suffix)), "{names:?}");
    }
}

#[test]
fn failing_run_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = shl(dir.path(), &["nonlinear-decay", "--data", "sigma-tail", "--b", "0.1"]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL"));
}

#[test]
fn zero_amplitude_and_sigma_edge_exit_zero() {
    let dir = tempfile::tempdir().unwrap();
    let o = shl(dir.path(), &["linear-decay", "--b", "0"]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("N/A"));
    let sigma = format!("{}", 13.0f64 / 3.0);
    let o = shl(dir.path(), &["nonlinear-decay", "--ell", &sigma, "--b", "0.1"]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("INCONCLUSIVE"));
}

#[test]
fn file_then_set_then_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.ini");
    std::fs::write(&cfg, "[problem]\nn = 11\np = 8\n").unwrap();
    let cfg = cfg.to_str().unwrap();
    let p_of = |o: &Output| json(o)["p"].as_f64().unwrap();
    assert_eq!(p_of(&shl(dir.path(), &["exponents", "--config", cfg])), 8.0);
    assert_eq!(p_of(&shl(dir.path(), &["exponents", "--config", cfg, "--set", "problem.p=9"])), 9.0);
    let o = shl(dir.path(), &["exponents", "--config", cfg, "--set", "problem.p=9", "--p", "7"]);
    assert_eq!(p_of(&o), 7.0);
}

#[test]
fn output_dir_flag_beats_env() {
    let env_dir = tempfile::tempdir().unwrap();
    let flag_dir = tempfile::tempdir().unwrap();
    let o = shl(env_dir.path(), &["exponents", "--output-dir", flag_dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert!(flag_dir.path().join("exponents_n11_p7.json").exists());
    assert!(!env_dir.path().join("exponents_n11_p7.json").exists());
}
