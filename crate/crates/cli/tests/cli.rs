#![allow(clippy::approx_constant)]

use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_witnesslab")).args(args).output().expect("binary runs")
}

fn run_env(args: &[&str], threads: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_witnesslab"))
        .args(args)
        .env("WITNESSLAB_THREADS", threads)
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("valid JSON")
}

fn tmp(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join(name)
}

#[test]
fn detect_ghz_example() {
    let out = run(&["detect", "--family", r#"{"family":"GHZ","params":{"n":3,"theta":0.5236}}"#, "--ops", "lowering"]);
    let report = json(&out);
    assert_eq!(report["detected1"], true);
    assert_eq!(report["detected2"], true);
    let (lhs, rhs1) = (report["lhs"].as_f64().unwrap(), report["rhs1"].as_f64().unwrap());
    assert!((lhs - 0.5236f64.cos() * 0.5236f64.sin()).abs() < 1e-12);
    assert!((rhs1 - 0.5236f64.sin().powi(2)).abs() < 1e-12);
}

#[test]
fn detect_with_inline_override() {
    let report = json(&run(&["detect", "--family", "GHZ", "--set", "theta=1.2", "--ops", "lowering"]));
    assert_eq!(report["detected1"], false);
}

#[test]
fn four_mode_threshold_example() {
    let args = ["threshold", "--family", "ModifiedFourMode", "--condition", "2", "--param", "x", "--bracket", "0.01,0.5", "--tol", "1e-4", "--format", "json"];
    let out = json(&run(&args));
    let value = out["threshold"]["value"].as_f64().unwrap();
    assert!((value - 0.1397).abs() < 5e-4, "threshold {value}");
    assert_eq!(out["threshold"]["detected_side"], "above");
}

#[test]
fn threshold_without_sign_change_is_usage_error() {
    let out = run(&["threshold", "--family", "GHZ", "--param", "theta", "--bracket", "0.1,0.2"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
}

#[test]
fn verify_passes() {
    let out = run(&["verify"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let rows = json(&run(&["verify", "--format", "json"]));
    let rows = rows.as_array().or_else(|| rows["rows"].as_array()).expect("row array");
    assert!(!rows.is_empty());
    assert!(rows.iter().all(|r| r["passed"] == true));
}

#[test]
fn oracle_small_run_passes() {
    let out = run(&["oracle", "--trials", "200", "--seed", "5", "--lemma-trials", "50"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn usage_errors_exit_two() {
    for args in [
        vec!["detect"],
        vec!["frobnicate"],
        vec!["detect", "--family", "nope"],
        vec!["detect", "--family", "GHZ", "--format", "xml"],
        vec!["scan", "--family", "GHZ", "--param", "theta", "--grid", "1,0,5"],
        vec!["scan", "--family", "GHZ", "--param", "x", "--grid", "0,1,5"],
    ] {
        let out = run(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(!out.stderr.is_empty(), "{args:?}");
    }
}

#[test]
fn scan_output_is_byte_identical() {
    let base = ["scan", "--family", "TwoGroupGHZ", "--param", "theta2", "--grid", "0,3.1,41"];
    for format in ["csv", "json"] {
        let args: Vec<&str> = base.iter().copied().chain(["--format", format]).collect();
        let first = run(&args);
        assert!(first.status.success());
        assert_eq!(first.stdout, run(&args).stdout, "{format}");
        assert_eq!(first.stdout, run_env(&args, "1").stdout, "{format} single thread");
        assert_eq!(first.stdout, run_env(&args, "3").stdout, "{format} three threads");
    }
}

#[test]
fn scan_csv_schema() {
    let out = run(&["scan", "--family", "GHZ", "--param", "theta", "--grid", "0,1.5,4"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let body: Vec<_> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(body[0], "param,lhs,rhs1,rhs2,margin1,margin2,detected1,detected2");
    assert_eq!(body.len(), 5);
    assert!(text.lines().any(|l| l.starts_with('#') && l.contains("epsilon")));
}

#[test]
fn output_flag_writes_file() {
    let path = tmp("scan_output.csv");
    let _ = std::fs::remove_file(&path);
    let out = run(&["scan", "--family", "GHZ", "--param", "theta", "--grid", "0,1,3", "--output", path.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let written = std::fs::read_to_string(&path).unwrap();
    assert!(written.contains("param,lhs"));
}
