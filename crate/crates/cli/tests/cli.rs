use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn cmcsep(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cmcsep")).args(args).output().expect("spawn cmcsep")
}

fn json_stdout(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn gen(dir: &Path, name: &str, args: &[&str]) -> PathBuf {
    let path = dir.join(name);
    let mut full = vec!["gen"];
    full.extend_from_slice(args);
    full.extend_from_slice(&["-o", path.to_str().unwrap()]);
    let out = cmcsep(&full);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    path
}

fn verdict<'a>(list: &'a Value, name: &str) -> &'a Value {
    list.as_array().unwrap().iter().find(|v| v["name"] == name).unwrap_or_else(|| panic!("no {name}"))
}

#[test]
fn detect_singlet_and_mixed() {
    let dir = tempfile::tempdir().unwrap();
    let singlet = gen(dir.path(), "singlet.json", &["--family", "werner", "--params", "1"]);
    let mixed = gen(dir.path(), "mixed.json", &["--family", "werner", "--params", "0"]);

    let v = json_stdout(&cmcsep(&["detect", singlet.to_str().unwrap()]));
    for name in ["ppt", "ccnr", "de-vicente", "singular-value", "trace", "schmidt", "filter-cmc", "sdp-2q"] {
        assert_eq!(verdict(&v, name)["detected"], true, "{name}");
    }
    let v = json_stdout(&cmcsep(&["detect", mixed.to_str().unwrap()]));
    assert!(v.as_array().unwrap().iter().all(|x| x["detected"] == false));

    let v = json_stdout(&cmcsep(&["detect", singlet.to_str().unwrap(), "--criteria", "ccnr,trace", "--basis", "pauli"]));
    assert_eq!(v.as_array().unwrap().len(), 2);
    assert!((verdict(&v, "ccnr")["margin"].as_f64().unwrap() - 1.0).abs() < 1e-9);
}

#[test]
fn witness_reports_lur() {
    let dir = tempfile::tempdir().unwrap();
    let singlet = gen(dir.path(), "s.json", &["--family", "werner", "--params", "1"]);
    let v = json_stdout(&cmcsep(&["witness", singlet.to_str().unwrap()]));
    assert_eq!(v["detected"], true);
    assert!(v["lambda"].as_f64().unwrap() < 0.0);
    let lur = v["lur"]["value"].as_f64().unwrap();
    assert!((lur - v["witness"]["value"].as_f64().unwrap()).abs() < 1e-7);
    assert!(lur < v["lur"]["bound"].as_f64().unwrap());
}

#[test]
fn witness_rejects_non_qubit_state() {
    let dir = tempfile::tempdir().unwrap();
    let upb = gen(dir.path(), "upb.json", &["--family", "upb", "--params", "0.5"]);
    let out = cmcsep(&["witness", upb.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn malformed_json_is_an_input_error_with_location() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"dims\": [2, 2],\n \"matrix\": [[\n").unwrap();
    let out = cmcsep(&["detect", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line") && err.contains("column"), "{err}");
}

#[test]
fn invalid_state_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("neg.json");
    // diag(1.5, -0.5) on a 2x1 system: Hermitian, unit trace, not positive.
    std::fs::write(&path, r#"{"dims":[2,1],"matrix":[[[1.5,0],[0,0]],[[0,0],[-0.5,0]]]}"#).unwrap();
    let out = cmcsep(&["detect", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("positive"));
}

#[test]
fn unknown_criterion_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let s = gen(dir.path(), "s.json", &["--family", "werner", "--params", "1"]);
    let out = cmcsep(&["detect", s.to_str().unwrap(), "--criteria", "nope"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn benchmark_with_no_samples() {
    let v = json_stdout(&cmcsep(&["benchmark", "-n", "0"]));
    assert_eq!(v["n_samples"], 0);
    assert!(v["criteria"].as_array().unwrap().iter().all(|c| c["detected"] == 0));
}

#[test]
fn benchmark_csv_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, seed: &str, mode: &str| {
        let p = dir.path().join(name);
        json_stdout(&cmcsep(&["benchmark", "-n", "40", "--seed", seed, "--mode", mode, "--csv", p.to_str().unwrap()]));
        std::fs::read(p).unwrap()
    };
    let a = run("a.csv", "7", "parallel");
    let b = run("b.csv", "7", "sequential");
    let c = run("c.csv", "8", "parallel");
    assert_eq!(a, b);
    assert_ne!(a, c);
    let text = String::from_utf8(a).unwrap();
    assert_eq!(text.lines().count(), 1 + 40 * 6);
}

#[test]
fn benchmark_separable_ensemble_detects_nothing() {
    let v = json_stdout(&cmcsep(&["benchmark", "--family", "separable:2:3", "-n", "30", "--criteria", "all"]));
    assert!(v["criteria"].as_array().unwrap().iter().all(|c| c["detected"] == 0), "{v}");
}

#[test]
fn threshold_werner_ppt() {
    let v = json_stdout(&cmcsep(&["threshold", "--family", "werner", "--criterion", "ppt"]));
    assert!((v["p_star"].as_f64().unwrap() - 1.0 / 3.0).abs() < 1e-4);
}

#[test]
fn fig1_csv_shape() {
    let out = cmcsep(&["fig1", "--step", "0.25"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("eps,r,region"));
    let rows: Vec<_> = lines.collect();
    assert_eq!(rows.len(), 25);
    assert!(rows.iter().all(|r| ["Same", "Different", "NotAState"].iter().any(|k| r.ends_with(k))));
}

#[test]
fn gen_is_deterministic_and_valid() {
    let a = cmcsep(&["gen", "--family", "random", "--params", "3,3,2", "--seed", "5"]);
    let b = cmcsep(&["gen", "--family", "random", "--params", "3,3,2", "--seed", "5"]);
    assert_eq!(a.stdout, b.stdout);
    let v = json_stdout(&a);
    assert_eq!(v["dims"], serde_json::json!([3, 3]));
    assert_eq!(v["metadata"]["family"], "random");

    let out = cmcsep(&["gen", "--family", "upb", "--params", "1,2"]);
    assert_eq!(out.status.code(), Some(2));
}
