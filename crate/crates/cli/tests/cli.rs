use std::process::{Command, Output};

use pap_core::certify::{check_certificate, Certificate};
use serde_json::Value;

fn papverify(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_papverify"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).expect("utf-8 output")
}

/// Data rows of a CSV report, skipping `#` header lines and the column header.
fn csv_rows(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header = lines.next().expect("column header").split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    (header, rows)
}

#[test]
fn verify_all_passes_at_p2() {
    let o = papverify(&["verify-all", "--p", "2", "--seed", "42"]);
    assert_eq!(o.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["passed"], Value::Bool(true));
    let checks = v["checks"].as_array().unwrap();
    assert_eq!(checks.len(), 9);
    assert!(checks.iter().all(|c| c["passed"] == Value::Bool(true)));
    assert_eq!(v["config"]["seed"], 42);
}

#[test]
fn certify_sl3_example_validates() {
    let o = papverify(&["certify", "--group", "sl3", "--from", "4,-1,-3", "--to", "6,-1,-5", "--p", "2"]);
    assert_eq!(o.status.code(), Some(0));
    let cert = Certificate::from_json(&stdout(&o)).unwrap();
    let report = check_certificate(&cert);
    assert!(report.valid, "{:?}", report.violations);
    assert!(cert.total <= report.envelope_value);
    assert!(!cert.steps.is_empty());
}

#[test]
fn certify_sp2_with_configured_constants_validates() {
    let o = papverify(&[
        "certify", "--group", "sp2", "--from", "9,8", "--to", "12,1", "--p", "2", "--c1-sp2", "1", "--c2-sp2", "1",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let cert = Certificate::from_json(&stdout(&o)).unwrap();
    assert!(check_certificate(&cert).valid);
    let c = cert.constants.sp2.unwrap();
    assert_eq!((c.c1_sp2, c.c2_sp2), (1.0, 1.0));
}

#[test]
fn spectra_theta_bound_dominates_norm() {
    let o = papverify(&["spectra", "--op", "theta", "--delta-grid", "64", "--cutoff", "256"]);
    assert_eq!(o.status.code(), Some(0));
    let (header, rows) = csv_rows(&stdout(&o));
    let col = |name: &str| header.iter().position(|h| h == name).unwrap();
    let (b, n) = (col("bound"), col("norm"));
    assert_eq!(rows.len(), 64);
    for row in rows {
        let bound: f64 = row[b].parse().unwrap();
        let norm: f64 = row[n].parse().unwrap();
        assert!(bound >= norm, "{bound} < {norm}");
    }
}

#[test]
fn identical_runs_give_identical_bytes() {
    let args = ["kak", "--samples", "50", "--seed", "7"];
    let (a, b) = (papverify(&args), papverify(&args));
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let args = ["spectra", "--op", "t", "--delta-grid", "6", "--format", "json"];
    assert_eq!(papverify(&args).stdout, papverify(&args).stdout);
}

#[test]
fn seed_changes_kak_samples() {
    let a = papverify(&["kak", "--group", "sl3", "--samples", "5", "--seed", "1", "--format", "csv"]);
    let b = papverify(&["kak", "--group", "sl3", "--samples", "5", "--seed", "2", "--format", "csv"]);
    assert_ne!(a.stdout, b.stdout);
}

#[test]
fn defaults_are_recorded_in_headers() {
    let o = papverify(&["spectra"]);
    let text = stdout(&o);
    for key in ["# op=theta", "# cutoff=256", "# grid_points=64", "# grid_spacing=log"] {
        assert!(text.contains(key), "missing {key}");
    }
    let o = papverify(&["demo", "--group", "sl3"]);
    let text = stdout(&o);
    assert!(text.contains("# radius=50.0") && text.contains("# n_max=20") && text.contains("# p=2.0"));
}

#[test]
fn demo_runs_for_both_groups() {
    for group in ["sl3", "sp2"] {
        let o = papverify(&["demo", "--group", group, "--p", "3"]);
        assert_eq!(o.status.code(), Some(0), "{group}: {}", String::from_utf8_lossy(&o.stderr));
        let (_, rows) = csv_rows(&stdout(&o));
        assert_eq!(rows.len(), 21);
    }
}

#[test]
fn sinh_single_point() {
    let o = papverify(&["sinh", "--from", "10,3"]);
    assert_eq!(o.status.code(), Some(0));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let row = &v["data"]["rows"][0];
    assert!(row["s"].as_f64().unwrap() >= 2.5);
    assert!(row["t"].as_f64().unwrap() >= 1.5);
}

#[test]
fn constants_report_identities() {
    let o = papverify(&["constants", "--group", "sl3", "--p", "2"]);
    assert_eq!(o.status.code(), Some(0));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["data"]["sl3"]["cTilde"].as_f64(), Some(4.0));
}

#[test]
fn out_flag_writes_file() {
    let dir = std::env::temp_dir().join(format!("papverify-test-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("constants.json");
    let o = papverify(&["constants", "--out", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(v["command"], "constants");
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn config_errors_exit_2_with_report() {
    let cases: &[&[&str]] = &[
        &["constants", "--p", "1"],
        &["spectra", "--cutoff", "0"],
        &["kak", "--tol", "-1"],
        &["certify", "--group", "sl3", "--from", "4,-1", "--to", "6,-1,-5"],
        &["certify", "--group", "sl3", "--from", "6,-1,-5", "--to", "4,-1,-3"],
        &["certify", "--from", "4,-1,-3", "--to", "6,-1,-5"],
        &["certify", "--group", "sl3", "--from", "1,2,-3", "--to", "6,-1,-5"],
        &["certify", "--group", "sp2", "--from", "1,2", "--to", "6,1"],
        &["demo", "--group", "sp2", "--p", "1.5"],
        &["constants", "--c1-sp2", "1"],
        &["sinh", "--group", "sl3"],
        &["not-a-command"],
    ];
    for args in cases {
        let o = papverify(args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        assert!(!o.stderr.is_empty(), "{args:?}");
    }
}

#[test]
fn failing_check_exits_1() {
    let o = papverify(&["sinh", "--from", "10,3", "--tol", "1e-300"]);
    assert_eq!(o.status.code(), Some(1));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["passed"], Value::Bool(false));
}
