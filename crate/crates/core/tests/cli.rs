use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn bin(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dsn-hiercode"))
        .current_dir(dir)
        .env_remove("DSN_HIERCODE_COLOR")
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", stdout(o)))
}

fn assert_error(o: &Output, code: &str) {
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8(o.stderr.clone()).unwrap();
    assert_eq!(err.trim_end().lines().count(), 1, "{err}");
    let v: Value = serde_json::from_str(&err).unwrap();
    assert_eq!(v["error"], code, "{err}");
}

fn fig3(dir: &TempDir) {
    let o = bin(dir.path(), &["build", "--topology", "preset:fig3", "--out", "c.dsnc"]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn build_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let a = bin(dir.path(), &["build", "--topology", "preset:fig3", "--out", "a.dsnc"]);
    let b = bin(dir.path(), &["build", "--topology", "preset:fig3", "--out", "b.dsnc"]);
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(std::fs::read(dir.path().join("a.dsnc")).unwrap(), std::fs::read(dir.path().join("b.dsnc")).unwrap());
    let v = json(&a);
    assert_eq!(v["generator"], serde_json::json!([24, 72]));
    assert_eq!(v["hierarchy"]["nodes"][1]["d"], serde_json::json!([3, 7]));
}

#[test]
fn build_from_file_matches_preset() {
    let dir = TempDir::new().unwrap();
    std::fs::write(dir.path().join("t.json"), dsn_hiercode::presets::FIG3_JSON).unwrap();
    bin(dir.path(), &["build", "--topology", "t.json", "--out", "a.dsnc"]);
    bin(dir.path(), &["build", "--topology", "preset:fig3", "--out", "b.dsnc"]);
    assert_eq!(std::fs::read(dir.path().join("a.dsnc")).unwrap(), std::fs::read(dir.path().join("b.dsnc")).unwrap());
}

#[test]
fn hierarchy_golden() {
    let dir = TempDir::new().unwrap();
    fig3(&dir);
    let o = bin(dir.path(), &["hierarchy", "--code", "c.dsnc", "--node", "2", "--human"]);
    assert_eq!(stdout(&o), "node 2: d=(3,7); I^1={1,3,5}; B^1={4,6,8}\n");
    let o = bin(dir.path(), &["hierarchy", "--code", "c.dsnc", "--node", "2", "--level", "1", "--helpers", "4"]);
    assert_eq!(json(&o)["lambda"], 6);
    let o =
        bin(dir.path(), &["hierarchy", "--code", "c.dsnc", "--node", "2", "--level", "1", "--helpers", "4", "--human"]);
    assert_eq!(stdout(&o), "lambda=6\n");
    let o = bin(dir.path(), &["hierarchy", "--code", "c.dsnc", "--node", "2", "--level", "1", "--helpers", "7"]);
    assert_error(&o, "lambda-domain");
}

#[test]
fn multi_level_build_and_overlap() {
    let dir = TempDir::new().unwrap();
    let o = bin(dir.path(), &["build", "--topology", "preset:fig4", "--multi-level", "--out", "c.dsnc"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(json(&o)["hierarchy"]["nodes"][1]["d"], serde_json::json!([1, 7, 8, 9]));
    let o = bin(dir.path(), &["build", "--topology", "preset:fig4-overlap", "--multi-level", "--out", "x.dsnc"]);
    assert_error(&o, "incompatible");
    let err: Value = serde_json::from_slice(&o.stderr).unwrap();
    let hits = err["details"].as_array().unwrap().iter().filter(|v| v["condition"] == 1 && v["node"] == 2).count();
    assert!(hits > 0);
    assert!(!dir.path().join("x.dsnc").exists());
}

#[test]
fn check_compat_exit_codes() {
    let dir = TempDir::new().unwrap();
    let ok = bin(dir.path(), &["check-compat", "--topology", "preset:fig4"]);
    assert_eq!(ok.status.code(), Some(0));
    assert_eq!(json(&ok)["compatible"], true);
    let bad = bin(dir.path(), &["check-compat", "--topology", "preset:fig4-overlap", "--human"]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(stdout(&bad).starts_with("incompatible\nviolation at node 2: cycles 1 and 11 share columns"));
}

#[test]
fn pipeline_recovers_node2() {
    let dir = TempDir::new().unwrap();
    fig3(&dir);
    let d = dir.path();
    assert!(bin(d, &["encode", "--code", "c.dsnc", "--seed", "3", "--messages-out", "m.bin", "--out", "cw.bin"])
        .status
        .success());
    let o = bin(d, &["corrupt", "--code", "c.dsnc", "--per-node", "2=5", "--seed", "7", "--out", "p.json"]);
    assert_eq!(stdout(&o), "{\"2\":[1,3,4,5,6]}\n");
    let o = bin(d, &["decode", "--code", "c.dsnc", "--codeword", "cw.bin", "--pattern", "p.json", "--out", "r.bin"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    assert_eq!(v["nodes"][1]["status"], "recovered-coop");
    assert_eq!(v["nodes"][1]["level"], 1);
    assert_eq!(std::fs::read(d.join("m.bin")).unwrap(), std::fs::read(d.join("r.bin")).unwrap());

    let again = bin(d, &["decode", "--code", "c.dsnc", "--codeword", "cw.bin", "--pattern", "p.json", "--trace"]);
    let twice = bin(d, &["decode", "--code", "c.dsnc", "--codeword", "cw.bin", "--pattern", "p.json", "--trace"]);
    assert_eq!(again.stdout, twice.stdout);
    assert!(json(&again)["trace"].as_array().unwrap().len() > 12);
}

#[test]
fn human_decode_golden() {
    let dir = TempDir::new().unwrap();
    fig3(&dir);
    let d = dir.path();
    bin(d, &["encode", "--code", "c.dsnc", "--out", "cw.bin"]);
    bin(d, &["corrupt", "--code", "c.dsnc", "--per-node", "2=5", "--seed", "7", "--out", "p.json"]);
    let o = bin(d, &["decode", "--code", "c.dsnc", "--codeword", "cw.bin", "--pattern", "p.json", "--human"]);
    let out = stdout(&o);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "node status          level time");
    assert_eq!(lines[1], "   1 recovered-local      0 -");
    assert_eq!(lines[2], "   2 recovered-coop       1 -");
    assert_eq!(lines.len(), 13);
}

#[test]
fn everything_erased_exits_one() {
    let dir = TempDir::new().unwrap();
    fig3(&dir);
    let d = dir.path();
    bin(d, &["encode", "--code", "c.dsnc", "--out", "cw.bin"]);
    bin(d, &["corrupt", "--code", "c.dsnc", "--per-node", "all", "--out", "p.json"]);
    let o = bin(d, &["decode", "--code", "c.dsnc", "--codeword", "cw.bin", "--pattern", "p.json"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(json(&o)["nodes"].as_array().unwrap().iter().all(|n| n["status"] == "failed"));
}

#[test]
fn corrupt_passes_patterns_through() {
    let dir = TempDir::new().unwrap();
    fig3(&dir);
    let d = dir.path();
    std::fs::write(d.join("in.json"), r#"{"4": [6, 2]}"#).unwrap();
    let o = bin(d, &["corrupt", "--code", "c.dsnc", "--pattern", "in.json", "--out", "p.json"]);
    assert_eq!(stdout(&o), "{\"4\":[2,6]}\n");
    std::fs::write(d.join("bad.json"), r#"{"4": [9]}"#).unwrap();
    assert_error(&bin(d, &["corrupt", "--code", "c.dsnc", "--pattern", "bad.json", "--out", "q.json"]), "pattern");
}

#[test]
fn simulate_reports_exact_times() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    bin(d, &["build", "--topology", "preset:example2", "--out", "c.dsnc"]);
    bin(d, &["encode", "--code", "c.dsnc", "--out", "cw.bin"]);
    bin(d, &["corrupt", "--code", "c.dsnc", "--per-node", "2=5", "--out", "p.json"]);
    let o = bin(d, &["simulate", "--code", "c.dsnc", "--codeword", "cw.bin", "--pattern", "p.json"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    assert_eq!(v["nodes"][1]["time"], "6/5");
    assert_eq!(v["nodes"][0]["time"], "0");
    let h = bin(d, &["simulate", "--code", "c.dsnc", "--codeword", "cw.bin", "--pattern", "p.json", "--human"]);
    assert!(stdout(&h).contains("   2 recovered-coop       1 6/5"));
}

#[test]
fn validate_node2() {
    let dir = TempDir::new().unwrap();
    fig3(&dir);
    let o = bin(dir.path(), &["validate", "--code", "c.dsnc", "--budget", "exhaustive:node=2", "--jobs", "2"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    assert_eq!(v["passed"], true);
    for s in v["strata"].as_array().unwrap().iter().filter(|s| s["probe"] == false) {
        assert_eq!(s["decoder_ok"], s["patterns"]);
    }
    let o = bin(dir.path(), &["validate", "--code", "c.dsnc", "--budget", "zero"]);
    assert_eq!(json(&o)["strata"], serde_json::json!([]));
    assert_error(&bin(dir.path(), &["validate", "--code", "c.dsnc", "--budget", "plenty"]), "budget");
}

#[test]
fn error_paths_are_single_line_json() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    assert_error(&bin(d, &["build", "--topology", "missing.json", "--out", "c.dsnc"]), "io");
    assert_error(&bin(d, &["build", "--topology", "preset:nope", "--out", "c.dsnc"]), "unknown-preset");
    std::fs::write(d.join("t.json"), r#"{"nodes":[{"id":1,"k":2,"r":0,"delta":0}],"edges":[]}"#).unwrap();
    assert_error(&bin(d, &["build", "--topology", "t.json", "--out", "c.dsnc"]), "zero-r");
    std::fs::write(d.join("junk.dsnc"), b"DSNCjunk").unwrap();
    assert_error(&bin(d, &["hierarchy", "--code", "junk.dsnc"]), "container");
}

#[test]
fn color_only_changes_escapes() {
    let dir = TempDir::new().unwrap();
    let plain = bin(dir.path(), &["check-compat", "--topology", "preset:fig4", "--human"]);
    let colored = Command::new(env!("CARGO_BIN_EXE_dsn-hiercode"))
        .env("DSN_HIERCODE_COLOR", "1")
        .args(["check-compat", "--topology", "preset:fig4", "--human"])
        .output()
        .unwrap();
    let c = stdout(&colored);
    assert!(c.contains("\x1b[32m"));
    assert_eq!(c.replace("\x1b[32m", "").replace("\x1b[0m", ""), stdout(&plain));
}
