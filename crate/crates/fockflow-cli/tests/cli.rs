use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn fockflow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fockflow")).args(args).output().expect("binary runs")
}

fn config(name: &str) -> String {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "..", "configs", name].iter().collect();
    p.to_str().unwrap().to_string()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn untimed(path: &std::path::Path) -> Value {
    let mut v: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    v.as_object_mut().unwrap().remove("timings");
    v
}

#[test]
fn verify_writes_a_passing_deterministic_report() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
    for out in [&a, &b] {
        let o = fockflow(&["verify", "--suite", "exact-identities", "--grids", "1,2", "--samples", "12", "--seed", "7", "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
        assert!(stderr(&o).contains("PASS exact-identities/associativity"));
    }
    let v = untimed(&a);
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["pass"], true);
    assert_eq!(v["seed"], 7);
    assert_eq!(v, untimed(&b));
}

#[test]
fn failing_case_exits_one() {
    let o = fockflow(&["verify", "--suite", "ito", "--grids", "2,3,4", "--samples", "4", "--tol", "1e-300"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("FAIL"));
}

#[test]
fn unknown_suite_lists_valid_names() {
    let o = fockflow(&["verify", "--suite", "foo"]);
    assert_eq!(o.status.code(), Some(2));
    let e = stderr(&o);
    for name in ["exact-identities", "multiplicativity", "ito", "evolution", "pseudo-fock", "flows", "norms"] {
        assert!(e.contains(name), "{e}");
    }
}

#[test]
fn lebesgue_sweep_writes_csv_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("lebesgue.csv");
    let o = fockflow(&["evolve", "--config", &config("lebesgue.toml"), "--sweep", "M=1..16", "--out", csv.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("M,dx,unitarity_defect,slope_estimate,vacuum_re,vacuum_im"));
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|x| x.parse().unwrap_or(f64::NAN)).collect()).collect();
    assert_eq!(rows.len(), 16);
    for r in &rows {
        let (re, im) = ((-1f64).cos(), -(1f64).sin());
        assert!((r[4] - re).hypot(r[5] - im) <= 2.0 * r[1], "{r:?}");
    }
    let report = untimed(&csv.with_extension("json"));
    assert_eq!(report["suite"], "evolve");
    assert_eq!(report["pass"], true);
}

#[test]
fn empty_sweep_uses_the_configured_grid() {
    let o = fockflow(&["evolve", "--config", &config("brownian.toml")]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = String::from_utf8(o.stdout).unwrap();
    assert_eq!(csv.lines().count(), 2);
    assert!(csv.lines().nth(1).unwrap().starts_with("8,"));
}

#[test]
fn brownian_and_flow_sweeps_converge() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("r.json");
    let o = fockflow(&["evolve", "--config", &config("brownian.toml"), "--sweep", "M=2,4,8,16", "--report", report.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let slope = untimed(&report)["convergence"][0]["slope"].as_f64().unwrap();
    assert!(slope >= 0.8, "{slope}");
    let o = fockflow(&["flow", "--config", &config("spatial_flow.toml"), "--sweep", "M=2..5", "--report", report.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = String::from_utf8(o.stdout).unwrap();
    assert!(csv.starts_with("M,dx,homomorphism_defect,slope_estimate\n"));
}

#[test]
fn norms_command() {
    let o = fockflow(&["norms", "--samples", "10", "--seed", "3"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["suite"], "norms");
}

#[test]
fn config_errors_report_locations() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    let text = std::fs::read_to_string(config("brownian.toml")).unwrap().replace("points = 8", "points = -8");
    std::fs::write(&bad, text).unwrap();
    let o = fockflow(&["evolve", "--config", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line"), "{}", stderr(&o));
}

#[test]
fn thread_cap_is_validated() {
    let o = Command::new(env!("CARGO_BIN_EXE_fockflow")).args(["norms", "--samples", "2"]).env("FOCKFLOW_THREADS", "zero").output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    let o = Command::new(env!("CARGO_BIN_EXE_fockflow")).args(["norms", "--samples", "2"]).env("FOCKFLOW_THREADS", "1").output().unwrap();
    assert!(o.status.success());
}
