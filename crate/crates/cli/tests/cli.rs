use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_ergodic-towers"));
    c.env_remove("ERGODIC_TOWERS_PIECE_CAP");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("ergodic-towers-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn kakutani_json_report() {
    let out = run(&["kakutani"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["command"], "kakutani");
    assert_eq!(v["ok"], true);
    assert_eq!(v["values"]["kac_sum"]["exact"], "1/1+0/1*sqrt(5)");
    // Base [0, golden) under the golden rotation returns in 1 or 2 steps.
    let heights: Vec<&str> = v["table"].as_array().unwrap().iter().map(|r| r["height"].as_str().unwrap()).collect();
    assert_eq!(heights, ["1", "2"]);
}

#[test]
fn inflate_csv_report() {
    let out = run(&["--format", "csv", "inflate", "--imax", "4"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("index,height,base_measure,"));
    assert!(text.contains("\nquantity,exact,decimal\n"));
    assert!(text.contains("fatness_is_3imax_over_z,true\n"));
    assert!(text.ends_with("ok,true\n"));
}

#[test]
fn out_and_dump_tower_files() {
    let report = scratch("rokhlin.json");
    let tower = scratch("rokhlin-tower.json");
    let out = bin()
        .args(["rokhlin", "--height", "5", "--eps", "1/20", "--out"])
        .arg(&report)
        .arg("--dump-tower")
        .arg(&tower)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let r: Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(r["audits"]["error_below_eps"], true);
    let t: Value = serde_json::from_str(&std::fs::read_to_string(&tower).unwrap()).unwrap();
    assert!(t.is_object());
}

#[test]
fn estimate_is_reproducible() {
    let args = [
        "--format", "csv", "estimate", "--system", "rotation:alpha=golden", "--set", "0,1/4", "--horizons",
        "8,64", "--samples", "500", "--seed", "3",
    ];
    let a = run(&args);
    let b = run(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    assert!(text.starts_with("H,samples,mean,stderr,seed\n8,500,"));
}

#[test]
fn configuration_errors_exit_two() {
    for args in [
        vec!["rokhlin", "--height", "4", "--eps", "0.1.1"],
        vec!["kakutani", "--system", "rotation:alpha=1/3"],
        vec!["kakutani", "--base", "1/2,1/4"],
        vec!["intrinsic", "--ks", "1,2,3"],
        vec!["estimate", "--system", "rotation:alpha=golden"],
        vec!["frobnicate"],
    ] {
        let out = run(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn failure_report_names_the_reason() {
    let out = run(&["kakutani", "--base", "1/2,1/4"]);
    let v = json(&out);
    assert_eq!(v["ok"], false);
    assert_eq!(v["error"]["kind"], "configuration");
}

#[test]
fn piece_cap_from_environment() {
    let capped = bin()
        .env("ERGODIC_TOWERS_PIECE_CAP", "1")
        .args(["kakutani", "--base", "0,1/7"])
        .output()
        .unwrap();
    assert_eq!(capped.status.code(), Some(2));
    let garbage = bin().env("ERGODIC_TOWERS_PIECE_CAP", "lots").arg("kakutani").output().unwrap();
    assert_eq!(garbage.status.code(), Some(2));
    let roomy = bin().env("ERGODIC_TOWERS_PIECE_CAP", "100000").arg("kakutani").output().unwrap();
    assert_eq!(roomy.status.code(), Some(0));
}

#[test]
fn help_exits_zero() {
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}
