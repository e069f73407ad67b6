use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn ellstab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ellstab")).args(args).env("ELLSTAB_PRECISION", "double").output().unwrap()
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap()
}

fn tmp(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join(name)
}

const PARAMS: &str = r#"{
  "a_log": [{"u_re": 0.1, "u_im": 0.7}, {"u_re": -0.3, "u_im": -1.9}, {"u_re": 0.4, "u_im": 2.5}],
  "hbar_half_log": {"u_re": 0.2, "u_im": 1.1},
  "z_log": {"u_re": -2.6, "u_im": 2.3},
  "q": {"re": 0.1, "im": 0.15}
}"#;

fn params_file() -> PathBuf {
    let p = tmp("params.json");
    std::fs::write(&p, PARAMS).unwrap();
    p
}

#[test]
fn theta_reports_value_and_identity() {
    let o = ellstab(&["theta", "--q", "0.3,0.1", "--u", "0.2,0.5"]);
    assert!(o.status.success());
    let v = json(&o);
    assert!(v["three_term_residual"].as_f64().unwrap() < 1e-12);
    assert_eq!(v["theta"], v["theta_direct"]);
}

#[test]
fn stab_from_file_is_lower_triangular() {
    let params = params_file();
    let csv = tmp("stab.csv");
    let o = ellstab(&["stab", "--params", params.to_str().unwrap(), "--csv", csv.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&o);
    let entries = v["entries"].as_array().unwrap();
    assert_eq!(entries.len(), 3);
    for (j, row) in entries.iter().enumerate() {
        for k in j + 1..3 {
            assert_eq!(row[k]["re"], 0.0);
            assert_eq!(row[k]["im"], 0.0);
        }
    }
    assert_eq!(std::fs::read_to_string(csv).unwrap().lines().count(), 10);
}

#[test]
fn stab_rejects_mismatched_n() {
    let params = params_file();
    let o = ellstab(&["stab", "--params", params.to_str().unwrap(), "--n", "2"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn malformed_params_exit_with_error() {
    let p = tmp("bad.json");
    std::fs::write(&p, r#"{"a_log": []}"#).unwrap();
    assert_eq!(ellstab(&["stab", "--params", p.to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn rmatrix_checks_pass() {
    for check in ["dyb", "unitarity"] {
        for form in ["product", "closed", "felder"] {
            let o = ellstab(&["rmatrix", "--check", check, "--form", form, "--draws", "10", "--seed", "3"]);
            assert!(o.status.success(), "{check} {form}");
            assert_eq!(json(&o)["records"].as_array().unwrap().len(), 10);
        }
    }
}

#[test]
fn vertex_emits_requested_order() {
    let params = params_file();
    let o = ellstab(&["vertex", "--space", "tpn", "--k", "1", "--order", "6", "--params", params.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(json(&o)["coefficients"].as_array().unwrap().len(), 7);
}

#[test]
fn limits_exit_codes_follow_verdicts() {
    assert_eq!(ellstab(&["limits", "--growth", "3", "0.4"]).status.code(), Some(0));
    assert_eq!(ellstab(&["limits", "--stab-support", "1.5"]).status.code(), Some(0));
    // Double precision cannot reach the limit tolerance along the default path.
    assert_eq!(ellstab(&["limits", "--theta-ratio"]).status.code(), Some(2));
}

#[test]
fn verify_writes_report_and_rejects_unknown_suites() {
    let out = tmp("verify-theta.json");
    let o = ellstab(&["verify", "--suite", "theta", "--seed", "1", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let report: Value = serde_json::from_str(&std::fs::read_to_string(out).unwrap()).unwrap();
    assert_eq!(report["schema_version"], 1);
    assert_eq!(report["precision"], "double");
    assert_eq!(ellstab(&["verify", "--suite", "bogus"]).status.code(), Some(1));
}

#[test]
fn precision_variable_is_validated() {
    let o = Command::new(env!("CARGO_BIN_EXE_ellstab"))
        .args(["verify", "--suite", "theta"])
        .env("ELLSTAB_PRECISION", "quad-ish")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
}
