//! End-to-end checks of the `dpcluster` binary: generate -> validate ->
//! cluster/bench flows, exit codes, and structured error output.

use std::process::{Command, Output};

fn dpcluster(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dpcluster"))
        .args(args)
        .output()
        .expect("binary must run")
}

#[test]
fn generate_validate_cluster_flow() {
    let dir = tempfile::tempdir().unwrap();
    let instance = dir.path().join("points.csv");
    let report = dir.path().join("report.json");

    let out = dpcluster(&[
        "generate",
        "--spec",
        "planted(2,12,10,0.5,2)",
        "--seed",
        "5",
        "--out",
        instance.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let out = dpcluster(&["validate", "--input", instance.to_str().unwrap()]);
    assert!(out.status.success());
    let summary: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(summary["ok"], true);
    assert_eq!(summary["n"], 12);

    let out = dpcluster(&[
        "cluster",
        "--input",
        instance.to_str().unwrap(),
        "--k",
        "2",
        "--epsilon-p",
        "2.0",
        "--delta-p",
        "0.1",
        "--seed",
        "7",
        "--out",
        report.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(doc["trials"].as_array().unwrap().len(), 1);
    assert_eq!(doc["trials"][0]["releasable"]["final_centers"].as_array().unwrap().len(), 2);
}

#[test]
fn audit_subcommand_emits_verdict() {
    let out = dpcluster(&[
        "audit",
        "--input",
        "planted(2,8,10,0.5,1)",
        "--k",
        "2",
        "--epsilon-p",
        "2.0",
        "--delta-p",
        "0.1",
        "--seed",
        "3",
        "--projection",
        "weight-bucket",
        "--bucket-threshold",
        "7.5",
        "--samples",
        "20000",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["verdict"], "pass");
    assert!(report["note"].as_str().unwrap().contains("not a certification"));
}

#[test]
fn errors_are_structured_json() {
    let out = dpcluster(&["validate", "--input", "/nonexistent/file.csv"]);
    assert!(!out.status.success());
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert!(err["error"]["kind"].is_string());
    assert!(err["error"]["message"].is_string());

    // epsilon outside (0, 0.6) is rejected by the pipeline
    let out = dpcluster(&[
        "cluster",
        "--input",
        "planted(2,8,10,0.5,1)",
        "--k",
        "2",
        "--epsilon",
        "0.9",
        "--epsilon-p",
        "2.0",
        "--delta-p",
        "0.1",
        "--seed",
        "3",
    ]);
    assert!(!out.status.success());
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "input");
}

#[test]
fn env_overrides_supply_flags() {
    let out = Command::new(env!("CARGO_BIN_EXE_dpcluster"))
        .args(["validate", "--input"])
        .arg("ignored-positional")
        .output()
        .unwrap();
    // sanity: missing file still errors
    assert!(!out.status.success());

    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("r.json");
    let out = Command::new(env!("CARGO_BIN_EXE_dpcluster"))
        .args(["bench", "--input", "planted(2,10,10,0.5,1)", "--k", "2"])
        .env("DPCLUSTER_EPSILON_P", "2.0")
        .env("DPCLUSTER_DELTA_P", "0.1")
        .env("DPCLUSTER_SEED", "11")
        .env("DPCLUSTER_TRIALS", "2")
        .env("DPCLUSTER_OUT", report.to_str().unwrap())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(doc["config"]["seed"], 11);
    assert_eq!(doc["trials"].as_array().unwrap().len(), 2);
}
