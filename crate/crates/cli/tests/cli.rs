use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn srm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_srm")).args(args).output().expect("run srm")
}

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn bubble_is_stable() {
    let out = srm(&["stability", "--L", "1", "--json"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(json(&out)["results"]["verdict"], "stable");
}

#[test]
fn vertical_plane_is_stable() {
    let dir = tempfile::tempdir().unwrap();
    let s = write(
        dir.path(),
        "plane.json",
        r#"{"version":"srm-v1","type":"graph","axis":1,"f":"0","domain":[[-1,1],[-1,1]]}"#,
    );
    let out = srm(&["stability", "--manifold", "heisenberg", "--surface", s.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn paraboloid_is_not_cmc() {
    let dir = tempfile::tempdir().unwrap();
    let s = write(
        dir.path(),
        "par.json",
        r#"{"version":"srm-v1","type":"graph","axis":3,"f":"x1^2+x2^2","domain":[[0.2,1],[0.2,1]]}"#,
    );
    let out = srm(&["stability", "--manifold", "heisenberg", "--surface", s.to_str().unwrap(), "--json"]);
    assert_eq!(out.status.code(), Some(4));
    assert_eq!(json(&out)["results"]["verdict"], "not-cmc");
}

#[test]
fn malformed_surface_reports_position() {
    let dir = tempfile::tempdir().unwrap();
    let s = write(dir.path(), "bad.json", "{\"version\":\"srm-v1\",\n \"type\": 1");
    let out = srm(&["perimeter", "--manifold", "heisenberg", "--surface", s.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 2"), "{err}");
}

#[test]
fn bad_expression_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let s = write(
        dir.path(),
        "bad.json",
        r#"{"version":"srm-v1","type":"level-set","phi":"x1*(x2+"}"#,
    );
    let out = srm(&["perimeter", "--manifold", "heisenberg", "--surface", s.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("phi"));
}

#[test]
fn bubble_curvature_and_pole() {
    let out = srm(&["curvature", "--L", "1", "--radius", "0.5", "--radius", "0", "--json"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    let pts = v["results"]["points"].as_array().unwrap();
    let h = pts[0]["curvature"]["h"].as_f64().unwrap();
    assert!((h - 4.0).abs() < 1e-10, "H = {h}");
    assert_eq!(pts[1]["status"], "characteristic");
}

#[test]
fn reports_are_deterministic() {
    let a = srm(&["bubble-report", "--L", "1.5", "--json"]);
    let b = srm(&["bubble-report", "--L", "1.5", "--json"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn report_round_trips() {
    let out = srm(&["minkowski-check", "--L", "1", "--json"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["schema"], "srm-report-v1");
    assert_eq!(v["inputs"].as_array().unwrap().len(), 2);
    let again: Value = serde_json::from_str(&serde_json::to_string(&v).unwrap()).unwrap();
    assert_eq!(v, again);
}

#[test]
fn csv_dump() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bubble.csv");
    let out = srm(&["bubble-report", "--L", "1", "--resolution", "5", "--dump-csv", p.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let text = fs::read_to_string(&p).unwrap();
    assert_eq!(text.lines().count(), 6);
    assert!(text.starts_with("r,phi"));
}

#[test]
fn verify_fourier_passes() {
    let out = srm(&["verify", "fourier"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn unknown_suite_fails() {
    assert_eq!(srm(&["verify", "nonsense"]).status.code(), Some(1));
}
