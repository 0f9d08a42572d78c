use std::path::PathBuf;
use std::process::Command;

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_nlqual"))
}

fn problem(name: &str) -> String {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../problems")
        .join(format!("{name}.json"));
    p.to_string_lossy().into_owned()
}

fn run_json(args: &[&str]) -> Value {
    let out = bin().args(args).arg("--json").output().unwrap();
    assert!(
        out.status.success(),
        "nlqual {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).unwrap()
}

fn strip_wall(mut v: Value) -> Value {
    v.as_object_mut().unwrap().remove("wall_ms");
    v
}

#[test]
fn identical_invocations_give_identical_reports() {
    let args = [
        "report",
        &problem("example1"),
        "--point",
        "1,0,1,0",
        "--seed",
        "42",
    ];
    let a = strip_wall(run_json(&args));
    let b = strip_wall(run_json(&args));
    assert_eq!(a, b);
}

#[test]
fn example1_report_reproduces_the_expected_verdicts() {
    let doc = run_json(&["report", &problem("example1"), "--point", "1,0,1,0"]);
    let checks = &doc["report"]["checks"];
    assert_eq!(checks["NNAMCQ"]["verdict"], "CERTIFIED_FAILS");
    assert_eq!(checks["QN_HORIZON"]["verdict"], "CERTIFIED_HOLDS");
    assert_eq!(checks["RCPLD_HORIZON"]["verdict"], "CERTIFIED_HOLDS");
    assert_eq!(checks["QN_CODERIV"]["verdict"], "CERTIFIED_HOLDS");
    assert_eq!(doc["report"]["kkt"]["status"], "FOUND");
}

#[test]
fn example2_report_flags_rcpld_only() {
    let doc = run_json(&["report", &problem("example2"), "--point", "1,0,0"]);
    let checks = &doc["report"]["checks"];
    assert_eq!(checks["RCPLD_HORIZON"]["verdict"], "LIKELY_FAILS");
    assert_eq!(checks["QN_HORIZON"]["verdict"], "LIKELY_HOLDS");
}

#[test]
fn golden_verdicts_on_examples_three_and_four() {
    let doc = run_json(&[
        "check",
        &problem("example3"),
        "--point",
        "0",
        "--conditions",
        "bq,cond13,qn,dqn",
    ]);
    for key in ["BQ", "COND13", "QN_HORIZON", "QN_CODERIV"] {
        assert_eq!(
            doc["report"][key]["verdict"], "CERTIFIED_HOLDS",
            "condition {key}"
        );
    }
    let doc = run_json(&[
        "check",
        &problem("example4"),
        "--point",
        "1,0",
        "--conditions",
        "impl28",
    ]);
    assert_eq!(doc["report"]["IMPLICATION28"]["verdict"], "CERTIFIED_HOLDS");
    let doc = run_json(&["kkt", &problem("example4"), "--point", "1,0"]);
    assert_eq!(doc["report"]["status"], "FOUND");
}

#[test]
fn missing_file_exits_two() {
    let st = bin()
        .args(["check", "/nonexistent/problem.json", "--point", "0"])
        .status()
        .unwrap();
    assert_eq!(st.code(), Some(2));
}

#[test]
fn malformed_problem_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, "{ not json").unwrap();
    let st = bin()
        .args(["check", path.to_str().unwrap(), "--point", "0"])
        .status()
        .unwrap();
    assert_eq!(st.code(), Some(2));
}

#[test]
fn infeasible_query_point_exits_three() {
    let st = bin()
        .args(["kkt", &problem("example1"), "--point", "5,5,5,5"])
        .status()
        .unwrap();
    assert_eq!(st.code(), Some(3));
}

#[test]
fn fails_verdicts_still_exit_zero() {
    let st = bin()
        .args([
            "check",
            &problem("example1"),
            "--point",
            "1,0,1,0",
            "--conditions",
            "nnamcq",
        ])
        .status()
        .unwrap();
    assert_eq!(st.code(), Some(0));
}

#[test]
fn solve_writes_the_report_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("solve.json");
    let st = bin()
        .args([
            "solve",
            &problem("example1"),
            "--rho",
            "64",
            "--start",
            "1.05,0.02,0.95,-0.02",
            "--out",
            out.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert_eq!(st.code(), Some(0));
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert!(doc["report"]["objective"].as_f64().unwrap() <= 2.0 + 1e-6);
}
