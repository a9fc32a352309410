use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn rotorq(cmd: &str, config: &str, dir: &Path) -> Output {
    let cfg = dir.join("config.json");
    fs::write(&cfg, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_rotorq"))
        .arg(cmd)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .output()
        .unwrap()
}

fn stderr_json(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stderr);
    serde_json::from_str(text.trim()).unwrap_or_else(|e| panic!("stderr is not JSON ({e}): {text}"))
}

fn read_json(dir: &Path, name: &str) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("out").join(name)).unwrap()).unwrap()
}

fn csv_body(text: &str) -> Vec<&str> {
    text.lines().filter(|l| !l.starts_with('#')).collect()
}

#[test]
fn minimal_spectrum_runs_with_defaults() {
    let dir = TempDir::new().unwrap();
    let out = rotorq("spectrum", r#"{"command": "spectrum", "v2": 20, "v1": 0}"#, dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(dir.path().join("out/spectrum.csv")).unwrap();
    assert!(text.contains("cutoff=12"));
    let body = csv_body(&text);
    assert_eq!(body[0], "level,eps");
    assert_eq!(body.len(), 11);
    let e0: f64 = body[1].split(',').nth(1).unwrap().parse().unwrap();
    assert!((e0 - -13.937).abs() < 1e-3);
}

#[test]
fn unknown_key_exits_2_with_key_and_line() {
    let dir = TempDir::new().unwrap();
    let out = rotorq("spectrum", "{\n  \"v2\": 20,\n  \"colour\": 3\n}", dir.path());
    assert_eq!(out.status.code(), Some(2));
    let err = stderr_json(&out);
    assert_eq!(err["error"], "unknown_key");
    assert_eq!(err["key"], "colour");
    assert_eq!(err["line"], 3);
    assert!(!dir.path().join("out/spectrum.csv").exists());
}

#[test]
fn bare_voltage_key_needs_units() {
    let dir = TempDir::new().unwrap();
    let out = rotorq("estimate", "{\"voltage\": 0.001}", dir.path());
    assert_eq!(out.status.code(), Some(2));
    let err = stderr_json(&out);
    assert_eq!(err["key"], "voltage");
    assert_eq!(err["line"], 1);
    assert!(err["message"].as_str().unwrap().contains("voltage_v"));
}

#[test]
fn negative_v2_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let out = rotorq("spectrum", "{\"v2\": -1}", dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["key"], "v2");
}

#[test]
fn syntax_error_reports_line() {
    let dir = TempDir::new().unwrap();
    let out = rotorq("spectrum", "{\n\"v2\": 20,\n}", dir.path());
    assert_eq!(out.status.code(), Some(2));
    let err = stderr_json(&out);
    assert_eq!(err["error"], "config_parse");
    assert_eq!(err["line"], 3);
}

#[test]
fn command_mismatch_and_missing_file() {
    let dir = TempDir::new().unwrap();
    let out = rotorq("sweep", r#"{"command": "spectrum", "v2": 20}"#, dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["error"], "config_command");

    let out = Command::new(env!("CARGO_BIN_EXE_rotorq"))
        .args(["spectrum", "--config", "/nonexistent/rotorq.json"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["error"], "config_read");
}

#[test]
fn bad_command_line_is_json_too() {
    let out = Command::new(env!("CARGO_BIN_EXE_rotorq")).arg("plot").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["error"], "usage");
}

#[test]
fn zero_duration_evolve_is_identity() {
    let dir = TempDir::new().unwrap();
    let out = rotorq("evolve", r#"{"v2": 20, "duration": 0, "initial_bit": 1}"#, dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(dir.path().join("out/trajectory.csv")).unwrap();
    let body = csv_body(&text);
    assert_eq!(body.len(), 2, "header plus one sample");
    assert!(body[1].starts_with("0,"));
    let report = read_json(dir.path(), "evolve.json")["result"].clone();
    assert_eq!(report["samples"], 1);
    assert!(report["final_readout"]["p1"].as_f64().unwrap() > 0.99);
    assert!(report["final_leakage"].as_f64().unwrap() < 1e-12);
}

#[test]
fn verify_identities_report() {
    let dir = TempDir::new().unwrap();
    let out = rotorq("verify-identities", "{}", dir.path());
    assert!(out.status.success());
    let r = read_json(dir.path(), "identities.json");
    let ids = r["result"]["identities"].as_array().unwrap();
    assert_eq!(ids.len(), 3);
    assert_eq!(ids[0]["rhs_label"], "CNOT");
    assert_eq!(ids[0]["pass"], true);
    assert_eq!(ids[1]["rhs_label"], "H");
    assert_eq!(ids[1]["pass"], false);
    assert_eq!(ids[2]["pass"], false);
    assert!(r["result"]["simulated_not"].is_null());
}

#[test]
fn divergent_geometry_is_rejected() {
    let dir = TempDir::new().unwrap();
    let cfg = r#"{"ell_m": 1e-7, "radius_m": 5e-8, "area_m2": 1e-16, "v12_v": 1e-3}"#;
    let out = rotorq("pair-report", cfg, dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["key"], "radius_m");
}

#[test]
fn leaky_gate_exits_3_but_is_written() {
    // A fast, deep V2 dip kicks population out of the lowest doublet.
    let dir = TempDir::new().unwrap();
    let cfg = r#"{"v2": 20, "duration": 4, "step": 0.002,
        "pulse": {"knob": "v2", "vbar": 20, "tau1": 1.0, "tau2": 1.6, "tsmooth": 0.05}}"#;
    let out = rotorq("gate-unitary", cfg, dir.path());
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(stderr_json(&out)["error"], "leakage");
    let gate = read_json(dir.path(), "gate.json");
    assert_eq!(gate["result"]["gate"]["valid"], false);
}

#[test]
fn artifacts_carry_hash_and_version() {
    let dir = TempDir::new().unwrap();
    let cfg = r#"{"ell_m": 1e-7, "radius_m": 1e-8, "area_m2": 1e-16, "v12_v": 1e-3}"#;
    let out = rotorq("pair-report", cfg, dir.path());
    assert!(out.status.success());
    let r = read_json(dir.path(), "pair_report.json");
    let expected = {
        use sha2::Digest;
        hex::encode(sha2::Sha256::digest(cfg.as_bytes()))
    };
    assert_eq!(r["meta"]["config_sha256"], expected.as_str());
    assert_eq!(r["meta"]["version"], env!("CARGO_PKG_VERSION"));
    assert!(r["result"]["J"].as_f64().unwrap() < 0.0);

    let out = rotorq("tunneling", r#"{"steps": 3}"#, dir.path());
    assert!(out.status.success());
    let text = fs::read_to_string(dir.path().join("out/tunneling.csv")).unwrap();
    let lines: Vec<_> = text.lines().collect();
    assert_eq!(lines[0], format!("# rotorq {}", env!("CARGO_PKG_VERSION")));
    assert!(lines[1].starts_with("# config_sha256 "));
    assert_eq!(csv_body(&text).len(), 4);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let cfg = r#"{"axis": "v1", "lo": 0, "hi": 1, "steps": 11, "fixed": 20}"#;
    assert!(rotorq("sweep", cfg, dir.path()).status.success());
    let first = fs::read(dir.path().join("out/sweep.csv")).unwrap();
    assert!(rotorq("sweep", cfg, dir.path()).status.success());
    assert_eq!(first, fs::read(dir.path().join("out/sweep.csv")).unwrap());
}
