use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const PARAMS: &str = r#"{"n":1,"alpha":1,"m":0,"p":2,"q":2}"#;
const CONTRACTION: &str =
    r#"{"u":{"kind":"poly","coeffs":[[0,1,0]]},"psi":{"kind":"affine","A":[[0.5,0]],"B":[0,0]}}"#;
const DIRAC: &str = r#"{"kind":"atomic","atoms":[[0,0,1]]}"#;

fn fockcheck(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fockcheck"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

fn json_lines(bytes: &[u8]) -> Vec<Value> {
    String::from_utf8(bytes.to_vec())
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

#[test]
fn lattice_report_starts_with_config() {
    let out = fockcheck(&["lattice", "--dim", "1", "--domain-radius", "4", "--separation", "1", "--probes", "2000"]);
    assert!(out.status.success());
    let records = json_lines(&out.stdout);
    assert_eq!(records[0]["record"], "config");
    assert_eq!(records[1]["record"], "lattice");
}

#[test]
fn invalid_parameters_exit_with_code_two() {
    let dir = TempDir::new().unwrap();
    let params = write(dir.path(), "p.json", r#"{"n":1,"alpha":1,"m":0,"p":-1,"q":2}"#);
    let measure = write(dir.path(), "d.json", DIRAC);
    let out = fockcheck(&["carleson", "--params", &params, "--measure", &measure]);
    assert_eq!(out.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["field"], "p");
}

#[test]
fn missing_files_exit_with_code_three() {
    let out = fockcheck(&["carleson", "--params", "/nonexistent/p.json", "--measure", "/nonexistent/d.json"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn point_mass_is_carleson() {
    let dir = TempDir::new().unwrap();
    let params = write(dir.path(), "p.json", PARAMS);
    let measure = write(dir.path(), "d.json", DIRAC);
    let out = fockcheck(&["carleson", "--params", &params, "--measure", &measure]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let records = json_lines(&out.stdout);
    assert_eq!(records[1]["record"], "carleson");
    assert_eq!(records[1]["is_carleson"], true);
}

#[test]
fn json_report_round_trips_through_out_file() {
    let dir = TempDir::new().unwrap();
    let params = write(dir.path(), "p.json", PARAMS);
    let report = dir.path().join("norms.jsonl");
    let out = fockcheck(&["verify-norms", "--params", &params, "--out", report.to_str().unwrap()]);
    assert!(out.status.success());
    let records = json_lines(&fs::read(&report).unwrap());
    assert_eq!(records[0]["params"]["p"], 2.0);
    let norms: Vec<&Value> = records.iter().filter(|r| r["record"] == "norm").collect();
    assert!(!norms.is_empty());
    for r in norms {
        assert!(r["relative_error"].as_f64().unwrap() < 1e-6, "{r}");
    }
}

#[test]
fn csv_report_writes_config_sidecar() {
    let dir = TempDir::new().unwrap();
    let params = write(dir.path(), "p.json", PARAMS);
    let symbol = write(dir.path(), "s.json", CONTRACTION);
    let report = dir.path().join("c.csv");
    let report_path = report.to_str().unwrap();
    let out = fockcheck(&[
        "compop", "--params", &params, "--symbol", &symbol, "--format", "csv", "--out", report_path,
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let mut reader = csv::Reader::from_path(&report).unwrap();
    let header = reader.headers().unwrap().clone();
    let row = reader.records().next().unwrap().unwrap();
    let bounded = header.iter().position(|h| h == "bounded").unwrap();
    let compact = header.iter().position(|h| h == "compact").unwrap();
    assert_eq!((&row[bounded], &row[compact]), ("true", "true"));
    let config: Value = serde_json::from_slice(&fs::read(format!("{report_path}.config.json")).unwrap()).unwrap();
    assert_eq!(config["command"], "compop");
}

#[test]
fn csv_without_out_is_a_config_error() {
    let out = fockcheck(&["lattice", "--dim", "1", "--domain-radius", "3", "--separation", "1", "--format", "csv"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let params = write(dir.path(), "p.json", PARAMS);
    let symbol = write(dir.path(), "s.json", CONTRACTION);
    let args = ["compop", "--params", params.as_str(), "--symbol", symbol.as_str(), "--seed", "7"];
    let first = fockcheck(&args);
    let second = fockcheck(&args);
    assert!(first.status.success());
    assert_eq!(first.stdout, second.stdout);
}
