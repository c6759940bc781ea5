//! End-to-end command-line checks against the shipped corpus.

use std::path::PathBuf;
use std::process::{Command, Output};

fn corpus(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../graft-core/corpus")
        .join(name)
}

fn graft(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_graft"))
        .args(args)
        .output()
        .expect("spawn graft")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).to_string()
}

fn temp_path(name: &str) -> PathBuf {
    let mut p = std::env::temp_dir();
    p.push(format!("graft-cli-test-{}-{name}", std::process::id()));
    p
}

#[test]
fn fuse_emits_extended_dsl() {
    let out = graft(&["fuse", corpus("fig2.tg").to_str().unwrap()]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("fuse _fuse__"));
    assert!(text.contains("stub __stub1 on Element"));
    assert!(text.contains("__stub1[0b11]"));
}

#[test]
fn fuse_writes_stats_json_with_schema_fields() {
    let stats = temp_path("stats.json");
    let outfile = temp_path("fused.tg");
    let out = graft(&[
        "fuse",
        corpus("render.tg").to_str().unwrap(),
        "-o",
        outfile.to_str().unwrap(),
        "--stats",
        stats.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let parsed: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&stats).unwrap()).unwrap();
    for field in ["sequencesFound", "unitsCreated", "unitsReused", "perUnit"] {
        assert!(parsed.get(field).is_some(), "missing {field}");
    }
    let per_unit = parsed["perUnit"].as_array().unwrap();
    assert!(!per_unit.is_empty());
    for field in ["key", "constituents", "groupedCalls", "splitEvents"] {
        assert!(per_unit[0].get(field).is_some(), "missing perUnit.{field}");
    }
    // the fused output re-fuses through run/diff flows
    assert!(std::fs::read_to_string(&outfile)
        .unwrap()
        .contains("fuse _fuse__"));
    let _ = std::fs::remove_file(stats);
    let _ = std::fs::remove_file(outfile);
}

#[test]
fn diff_reports_empty_state_diff_and_ratio() {
    let out = graft(&[
        "diff",
        corpus("render.tg").to_str().unwrap(),
        "--pages",
        "10",
        "--seed",
        "1",
        "--json",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let parsed: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(parsed["statesIdentical"], serde_json::json!(true));
    assert_eq!(parsed["statementMultisetEqual"], serde_json::json!(true));
    assert!(parsed["visitRatio"].as_f64().unwrap() <= 1.0);
}

#[test]
fn identity_fusion_diff_is_clean() {
    let fused = temp_path("identity.tg");
    let out = graft(&[
        "fuse",
        corpus("fig2.tg").to_str().unwrap(),
        "--max-seq",
        "1",
        "-o",
        fused.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let out = graft(&[
        "diff",
        corpus("fig2.tg").to_str().unwrap(),
        "--max-seq",
        "1",
        "--size",
        "30",
        "--seed",
        "2",
    ]);
    assert!(out.status.success());
    let _ = std::fs::remove_file(fused);
}

#[test]
fn run_writes_metrics() {
    let metrics = temp_path("metrics.json");
    let out = graft(&[
        "run",
        corpus("ast.tg").to_str().unwrap(),
        "--size",
        "40",
        "--seed",
        "3",
        "--metrics",
        metrics.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let parsed: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&metrics).unwrap()).unwrap();
    assert!(parsed["metrics"]["nodeVisits"].as_u64().unwrap() > 0);
    assert!(parsed["metrics"]["simpleStatements"].as_u64().unwrap() > 0);
    let _ = std::fs::remove_file(metrics);
}

#[test]
fn stats_dumps_are_dot() {
    let out = graft(&[
        "stats",
        corpus("fig2.tg").to_str().unwrap(),
        "--call-graph",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("digraph callgraph"));
    assert!(text.contains("label=\"Next\""));

    let out = graft(&[
        "stats",
        corpus("fig2.tg").to_str().unwrap(),
        "--depgraph",
        "main:0",
    ]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("digraph depgraph"));

    let out = graft(&[
        "stats",
        corpus("fig2.tg").to_str().unwrap(),
        "--automata",
        "TextBox::computeWidth/1",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("tree-read"));
    assert!(text.contains("tree-write"));
}

#[test]
fn errors_are_machine_readable_and_nonzero() {
    let out = graft(&["run", "/nonexistent/prog.tg"]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    let parsed: serde_json::Value = serde_json::from_str(err.trim()).unwrap();
    assert!(parsed["error"]["kind"].is_string());

    // a syntax error carries its kind
    let bad = temp_path("bad.tg");
    std::fs::write(&bad, "node {").unwrap();
    let out = graft(&["run", bad.to_str().unwrap(), "--json"]);
    assert!(!out.status.success());
    let parsed: serde_json::Value =
        serde_json::from_str(String::from_utf8_lossy(&out.stderr).trim()).unwrap();
    assert_eq!(parsed["error"]["kind"], serde_json::json!("SyntaxError"));
    let _ = std::fs::remove_file(bad);
}
