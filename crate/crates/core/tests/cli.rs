//! End-to-end tests of the `gabench` binary: exit-code contract, report
//! output and determinism.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/table1")
}

fn gabench(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gabench"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

#[test]
fn validate_clean_fixture_exits_zero() {
    let out = gabench(&["validate", "--data", fixture_dir().to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(stdout(&out).contains("6 DMUs"));
}

#[test]
fn validate_missing_path_exits_two_and_names_it() {
    let out = gabench(&["validate", "--data", "/nonexistent/nowhere"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("nowhere"), "{}", stderr(&out));
}

#[test]
fn validate_bad_weights_exits_one() {
    let tmp = tempfile::tempdir().unwrap();
    for f in ["dmus.csv", "goals.csv"] {
        std::fs::copy(fixture_dir().join(f), tmp.path().join(f)).unwrap();
    }
    std::fs::write(
        tmp.path().join("weights.csv"),
        "indicator_id,weight\ny1,0.5\ny2,0.4\n",
    )
    .unwrap();
    let out = gabench(&["validate", "--data", tmp.path().to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("weights_sum_to_one"), "{}", stderr(&out));
}

#[test]
fn frontier_prints_efficient_set_and_classifications() {
    let out = gabench(&["frontier", "--data", fixture_dir().to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("E = {A, B, C}"), "{text}");
    assert!(text.contains("D: goals OutsideAS"), "{text}");
    assert!(text.contains("E: goals InteriorOfAS"), "{text}");
    assert!(text.contains("F: goals OnParetoFrontier"), "{text}");
}

#[test]
fn evaluate_singletons_reproduces_published_rows() {
    let out = gabench(&[
        "evaluate",
        "--data",
        fixture_dir().to_str().unwrap(),
        "--grouping",
        "singletons",
        "--format",
        "text",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("targets  (4, 5.8)"), "{text}");
    assert!(text.contains("payments 6.67/5.5/12.17"), "{text}");
    assert!(text.contains("targets  (8.25, 2)"), "{text}");
}

#[test]
fn evaluate_with_oracle_check_passes() {
    let out = gabench(&[
        "evaluate",
        "--data",
        fixture_dir().to_str().unwrap(),
        "--grouping",
        "singletons",
        "--oracle-check",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
}

#[test]
fn evaluate_json_to_file_and_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let out_path = tmp.path().join("report.json");
    let data = fixture_dir();
    let args = [
        "evaluate",
        "--data",
        data.to_str().unwrap(),
        "--grouping",
        "singletons",
        "--format",
        "json",
        "--out",
        out_path.to_str().unwrap(),
    ];
    let out = gabench(&args);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let first = std::fs::read_to_string(&out_path).unwrap();
    let parsed: serde_json::Value = serde_json::from_str(&first).unwrap();
    assert_eq!(parsed["rows"].as_array().unwrap().len(), 6);
    // identical invocation, byte-identical report
    let out = gabench(&args);
    assert_eq!(code(&out), 0);
    assert_eq!(std::fs::read_to_string(&out_path).unwrap(), first);
}

#[test]
fn evaluate_dump_lp_writes_models() {
    let tmp = tempfile::tempdir().unwrap();
    let dump = tmp.path().join("lp");
    let out = gabench(&[
        "evaluate",
        "--data",
        fixture_dir().to_str().unwrap(),
        "--grouping",
        "single-group",
        "--dump-lp",
        dump.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let entries: Vec<_> = std::fs::read_dir(&dump).unwrap().collect();
    assert_eq!(entries.len(), 1);
    let lp = std::fs::read_to_string(entries[0].as_ref().unwrap().path()).unwrap();
    assert!(lp.contains("Minimize"));
    assert!(lp.contains("SOS"));
}

#[test]
fn unknown_solver_exits_three() {
    let out = gabench(&[
        "evaluate",
        "--data",
        fixture_dir().to_str().unwrap(),
        "--solver",
        "cplex",
    ]);
    assert_eq!(code(&out), 3);
    assert!(stderr(&out).contains("cplex"), "{}", stderr(&out));
}

#[test]
fn env_vars_mirror_flags() {
    let out = Command::new(env!("CARGO_BIN_EXE_gabench"))
        .args(["evaluate", "--grouping", "singletons", "--format", "csv"])
        .env("GABENCH_DATA", fixture_dir())
        .output()
        .expect("binary runs");
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(stdout(&out).lines().next().unwrap().starts_with("dmu_id,"));
}

#[test]
fn big_m_mode_still_reproduces_targets() {
    let out = gabench(&[
        "evaluate",
        "--data",
        fixture_dir().to_str().unwrap(),
        "--grouping",
        "singletons",
        "--no-sos1",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(stdout(&out).contains("targets  (4, 5.8)"));
}
