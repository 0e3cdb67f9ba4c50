#![allow(clippy::approx_constant)]

use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_schatten-lab"));
    c.env_remove("SCHATTEN_LAB_THREADS");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn scratch(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("schatten-lab-cli-{tag}-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn rate_middle_branch() {
    let out = run(&["rate", "--p", "1", "--q", "2", "--N", "4", "--n", "8"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout.clone()).unwrap();
    assert!(text.contains("\"rate\":0.7071067811865476"), "{text}");
    let v = stdout_json(&out);
    assert_eq!(v["rate"].as_f64(), Some(0.7071067811865476));
    assert_eq!(v["status"], "ok");
    assert_eq!(v["seed"], 0);
}

#[test]
fn rate_plateau_branch() {
    let out = run(&["rate", "--p", "1", "--q", "2", "--N", "4", "--n", "2"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("\"rate\":1.0"));
}

#[test]
fn report_envelope() {
    let v = stdout_json(&run(&["rate", "--p", "1/2", "--q", "inf", "--N", "3", "--n", "5", "--seed", "11"]));
    for key in ["tool", "version", "command", "config", "wall_clock_seconds", "provenance"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    assert_eq!(v["seed"], 11);
    assert_eq!(v["config"]["params"]["q"], "inf");
    assert_eq!(v["regime"], "middle");
}

#[test]
fn sandwich_csv_is_byte_identical() {
    let dir = scratch("sandwich");
    let mut files = Vec::new();
    for (i, threads) in ["1", "4"].iter().enumerate() {
        let path = dir.join(format!("run{i}.csv"));
        let p = path.to_str().unwrap();
        let out = run(&["sandwich", "--p", "1", "--q", "2", "--N", "4", "--levels", "1,2", "--seed", "7", "--format", "csv", "--threads", threads, "--out", p]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        assert_eq!(String::from_utf8_lossy(&out.stdout).lines().count(), 1);
        files.push(std::fs::read(&path).unwrap());
    }
    assert_eq!(files[0], files[1]);
    assert!(files[0].starts_with(b"n,lower,upper,theory,ratio\n8,"));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn config_file_with_flag_override() {
    let dir = scratch("config");
    let cfg = dir.join("run.json");
    std::fs::write(&cfg, r#"{"command": "rate", "seed": 5, "params": {"p": 1, "q": 2, "N": 4, "n": 2}}"#).unwrap();
    let v = stdout_json(&run(&["rate", "--config", cfg.to_str().unwrap(), "--n", "8"]));
    assert_eq!(v["rate"].as_f64(), Some(0.7071067811865476));
    assert_eq!(v["seed"], 5);
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn invalid_input_exits_two_with_marker() {
    let dir = scratch("invalid");
    let report = dir.join("report.json");
    std::fs::write(&report, "stale").unwrap();
    let cfg = dir.join("bad.json");
    std::fs::write(&cfg, r#"{"params": {"p": 1, "q": 2, "N": 4, "n": 8, "bogus": 1}}"#).unwrap();
    let out = run(&["rate", "--config", cfg.to_str().unwrap(), "--out", report.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(v["status"], "failed");
    assert_eq!(v["exit_code"], 2);

    assert_eq!(run(&["rate", "--p", "1", "--q", "2", "--N", "4"]).status.code(), Some(2));
    assert_eq!(run(&["rate", "--p", "-1", "--q", "2", "--N", "4", "--n", "1"]).status.code(), Some(2));
    assert_eq!(run(&["sandwich", "--p", "1", "--q", "2", "--N", "4", "--levels", "3"]).status.code(), Some(2));
    assert_eq!(bin().args(["rate", "--p", "1", "--q", "2", "--N", "4", "--n", "8"]).env("SCHATTEN_LAB_THREADS", "many").output().unwrap().status.code(), Some(2));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn numeric_failure_exits_three_with_marker() {
    // ten proposals never land in the N = 6 quasi-norm ball
    let out = run(&["volume", "--p", "0.5", "--N", "6", "--samples", "10"]);
    assert_eq!(out.status.code(), Some(3));
    let v = stdout_json(&out);
    assert_eq!(v["status"], "failed");
    assert_eq!(v["command"], "volume");
}

#[test]
fn built_net_passes_its_audit() {
    let dir = scratch("net");
    let net_dir = dir.join("net");
    let build = run(&["net-build", "--p", "1", "--q", "2", "--N", "4", "--levels", "2", "--net-dir", net_dir.to_str().unwrap()]);
    assert!(build.status.success(), "{}", String::from_utf8_lossy(&build.stderr));
    let index = stdout_json(&build)["index_file"].as_str().unwrap().to_string();
    let audit = stdout_json(&run(&["net-audit", "--net", &index, "--samples", "150", "--seed", "3"]));
    assert_eq!(audit["audit"]["probes"], 150);
    assert_eq!(audit["covered"], true);
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn recovery_and_grassmann_csv() {
    let out = run(&["recovery", "--N", "4", "--m-grid", "4,8,16", "--trials", "3", "--format", "csv"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().next(), Some("m,worst_error,theory_lower"));
    assert_eq!(text.lines().count(), 4);

    let out = run(&["grassmann", "--N", "3", "--k", "1", "--delta-grid", "0.3,0.6", "--samples", "20000", "--format", "csv"]);
    assert!(out.status.success());
    assert!(String::from_utf8(out.stdout).unwrap().starts_with("delta,probability,std_error,hits,widened_ci\n0.3,"));
}
