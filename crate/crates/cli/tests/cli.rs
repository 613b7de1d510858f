use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use bellkit_core::scenario::{make_theta_family, make_theta_family_primed, BellScenario, DistributionTuple};
use serde_json::Value;
use tempfile::TempDir;

fn bellkit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bellkit")).args(args).output().expect("binary runs")
}

fn json_of(out: &Output) -> Value {
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn write(dir: &TempDir, name: &str, p: &DistributionTuple) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, p.to_json()).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn threshold_prints_n_star() {
    let v = json_of(&bellkit(&["threshold"]));
    let n = v["n_star"].as_f64().unwrap();
    assert!((n - 0.652).abs() < 1e-3);
    assert_eq!(n, 0.651841134838);
}

#[test]
fn theta_sweep_csv_matches_rate_reports() {
    let out = bellkit(&["theta-sweep", "--from", "0", "--to", "0.7854", "--steps", "100", "--csv"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "theta,S,N_tilde,I,eve_bound,dw_lower,g_of_N");
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|c| c.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 100);
    for row in &rows {
        let theta = row[0];
        let expected = bellkit_core::rate_report(&make_theta_family(theta, false)).unwrap();
        assert!((row[1] - expected.s).abs() < 1e-11);
        assert!((row[1] - 2.0 * 2f64.sqrt() * (theta - std::f64::consts::FRAC_PI_4).cos()).abs() < 1e-11);
        assert!((row[2] - expected.n_tilde).abs() < 1e-11);
        assert!((row[6] - expected.g_of_n).abs() < 1e-11);
    }
    assert_eq!(rows[0][0], 0.0);
    assert_eq!(rows[99][0].to_string(), "0.7854");
}

#[test]
fn validate_reports_negative_entries_as_data() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, r#"{"m":1,"n":1,"outputs_a":[-1,1],"outputs_b":[-1,1],"p":[[[[-0.1,0.6],[0.25,0.25]]]]}"#)
        .unwrap();
    let v = json_of(&bellkit(&["validate", s(&path)]));
    assert_eq!(v["nonnegative"], Value::Bool(false));
    assert_eq!(v["normalized"], Value::Bool(true));
}

#[test]
fn usage_errors_exit_2() {
    let unknown = bellkit(&["threshold", "--frobnicate"]);
    assert_eq!(unknown.status.code(), Some(2));
    assert!(!unknown.stderr.is_empty());
    assert_eq!(bellkit(&["validate", "/nonexistent/file.json"]).status.code(), Some(2));
    assert_eq!(bellkit(&[]).status.code(), Some(2));
    let dir = TempDir::new().unwrap();
    let ragged = dir.path().join("ragged.json");
    std::fs::write(&ragged, r#"{"m":1,"n":1,"outputs_a":[-1,1],"outputs_b":[-1,1],"p":[[[[0.5],[0.5]]]]}"#).unwrap();
    assert_eq!(bellkit(&["validate", s(&ragged)]).status.code(), Some(2));
    let pr = write(&dir, "pr.json", &DistributionTuple::pr_box());
    // PR box exceeds the quantum bound: rate formulas are undefined there.
    assert_eq!(bellkit(&["rates", s(&pr)]).status.code(), Some(2));
    assert_eq!(bellkit(&["simulate", s(&pr), "--protocol", "nu-masked", "--nu", "3,0"]).status.code(), Some(2));
}

#[test]
fn chsh_and_locality_verdicts() {
    let dir = TempDir::new().unwrap();
    let pr = write(&dir, "pr.json", &DistributionTuple::pr_box());
    let v = json_of(&bellkit(&["chsh", s(&pr)]));
    assert_eq!(v["S"].as_f64().unwrap(), 4.0);
    assert_eq!(v["N_tilde"].as_f64().unwrap(), 2.0);

    let nonlocal = json_of(&bellkit(&["local", s(&pr), "--fraction"]));
    assert_eq!(nonlocal["kind"], "nonlocal");
    assert!(nonlocal["value"].as_f64().unwrap() > nonlocal["local_bound"].as_f64().unwrap());
    assert_eq!(nonlocal["local_fraction"].as_f64().unwrap(), 0.0);

    let u = write(&dir, "u.json", &DistributionTuple::uniform(BellScenario::chsh()));
    let local = json_of(&bellkit(&["local", s(&u)]));
    assert_eq!(local["kind"], "local");
    let total: f64 = local["weights"].as_object().unwrap().values().map(|w| w.as_f64().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-9);
}

#[test]
fn order_and_lemma_simulation() {
    let dir = TempDir::new().unwrap();
    let p = write(&dir, "p.json", &make_theta_family(0.6, true));
    let q = write(&dir, "q.json", &make_theta_family_primed(0.6));
    let v = json_of(&bellkit(&["order", s(&p), s(&q)]));
    assert_eq!(v["feasible"], Value::Bool(true));
    assert!(v["certificate"]["residual"].as_f64().unwrap() < 1e-8);

    let back = json_of(&bellkit(&[
        "order",
        s(&write(&dir, "u.json", &DistributionTuple::uniform(BellScenario::binary(3, 2).unwrap()))),
        s(&p),
    ]));
    assert_eq!(back["feasible"], Value::Bool(false));

    let trace = dir.path().join("trace.csv");
    let args = [
        "simulate",
        s(&p),
        "--protocol",
        "lemma",
        "--target",
        s(&q),
        "--x",
        "2",
        "--y",
        "1",
        "--rounds",
        "20000",
        "--seed",
        "4",
    ];
    let sim = json_of(&bellkit(&[&args[..], &["--trace", s(&trace)]].concat()));
    assert_eq!(sim["rounds"].as_u64().unwrap(), 20000);
    assert!(sim["tv_distance"].as_f64().unwrap() < 0.03);
    let csv = std::fs::read_to_string(&trace).unwrap();
    assert_eq!(csv.lines().count(), 20001);
    assert!(csv.starts_with("round,k,x,y,e,u,v,a,b\n"));
}

#[test]
fn identical_invocations_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let p = write(&dir, "p.json", &make_theta_family(std::f64::consts::FRAC_PI_4, false));
    let args = ["simulate", s(&p), "--protocol", "nu-masked", "--rounds", "200000", "--seed", "9"];
    let a = bellkit(&args);
    let b = bellkit(&[&args[..], &["--threads", "1"]].concat());
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let v: Value = serde_json::from_slice(&a.stdout).unwrap();
    let expected = v["analytic_correlator"].as_f64().unwrap();
    assert!((expected - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-11);
}

#[test]
fn out_flag_writes_file() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("rates.json");
    let p = write(&dir, "p.json", &make_theta_family(0.5, false));
    let run = bellkit(&["rates", s(&p), "--out", s(&out)]);
    assert_eq!(run.status.code(), Some(0));
    assert!(run.stdout.is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    for key in ["S", "N_tilde", "mutual_info", "eve_bound", "dw_lower", "g_of_n", "threshold_flag"] {
        assert!(v.get(key).is_some(), "{key}");
    }
}
