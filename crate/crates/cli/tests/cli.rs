use std::fs;
use std::process::{Command, Output};

fn lmlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lmlab"))
        .env_remove("LMLAB_SEED")
        .args(args)
        .output()
        .unwrap()
}

const FAST: [&str; 6] = ["--pairs", "2000", "--chords", "2000", "--dual-samples", "5000"];

#[test]
fn analyze_minkowski_exits_zero() {
    let mut args = vec!["analyze", "minkowski2", "--deterministic"];
    args.extend(FAST);
    let out = lmlab(&args);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["summary"]["exit_code"], 0);
    assert_eq!(report["spec"]["name"], "minkowski2");
    assert_eq!(report["outcomes"].as_array().unwrap().len(), 10);
}

#[test]
fn negative_control_exits_one_with_first_failure() {
    let out = lmlab(&["check", "randers4", "--property", "validity", "--validity-samples", "500"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("first failing verdict: validity: DOMAIN_WITNESS"), "{err}");
}

#[test]
fn input_errors_exit_two() {
    for args in [
        vec!["check", "nosuch", "--property", "cs"],
        vec!["check", "minkowski2", "--property", "nosuch"],
        vec!["analyze", "--expr", "0.5*(-v0^2+v1^2", "--dim", "2"],
        vec!["analyze", "--expr", "0.5*(-v0^2+v1^2)"],
        vec!["analyze", "beem3", "--param", "alpha"],
        vec!["analyze", "beem3", "--param", "gamma=1"],
    ] {
        let out = lmlab(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
    }
}

#[test]
fn expressions_are_analysed() {
    let out = lmlab(&["check", "--expr", "0.5*(-v0^2+v1^2+v2^2)", "--dim", "3", "--property", "euler"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["outcomes"][0]["verdict"], "FINSLER");
}

#[test]
fn report_goes_to_file_and_seed_comes_from_env() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    let base = ["check", "beem3", "--property", "cones", "--deterministic", "--out"];
    let out = lmlab(&[&base[..], &[a.to_str().unwrap(), "--seed", "3"]].concat());
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let out = Command::new(env!("CARGO_BIN_EXE_lmlab"))
        .env("LMLAB_SEED", "3")
        .args(base)
        .arg(&b)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let (ra, rb) = (fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_eq!(ra, rb);
    let report: serde_json::Value = serde_json::from_slice(&ra).unwrap();
    assert_eq!(report["run"]["seed"], 3);
    assert!(report["run"]["generated_unix"].is_null());
}

#[test]
fn export_writes_labelled_samples_and_level_set() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.csv");
    let out = lmlab(&["export", "minkowski2", "--samples", "200", "--level", "1", "--out", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let mut reader = csv::Reader::from_path(&path).unwrap();
    let header: Vec<String> = reader.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(header.len(), 6);
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    let level: Vec<&csv::StringRecord> = rows.iter().filter(|r| &r[4] == "LEVEL").collect();
    assert!(!level.is_empty());
    assert!(rows.iter().any(|r| &r[4] == "TIMELIKE") && rows.iter().any(|r| &r[4] == "SPACELIKE"));
    for r in level {
        let v: Vec<f64> = (0..3).map(|i| r[i].parse().unwrap()).collect();
        let two_l = -v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
        assert!((two_l + 1.0).abs() < 1e-9, "{v:?}");
    }
}

#[test]
fn export_of_a_field_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = lmlab(&["export", "hopf4", "--out", dir.path().join("h.csv").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn list_names_entries_and_properties() {
    let out = lmlab(&["list"]);
    let text = String::from_utf8(out.stdout).unwrap();
    for name in ["minkowski3", "beem3", "hopf4", "odd_perturbed", "borsuk", "dualnorm"] {
        assert!(text.contains(name), "{name}");
    }
}
