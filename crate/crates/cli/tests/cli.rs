use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn sag(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sag")).args(args).output().expect("binary runs")
}

fn json_of(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!("stdout is not JSON ({e}): {}", String::from_utf8_lossy(&out.stdout))
    })
}

fn ok_json(args: &[&str]) -> Value {
    let out = sag(args);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    json_of(&out)
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn solve_split_star() {
    let v = ok_json(&["solve", "--in", path(&data("split_star.json"))]);
    assert_eq!(v["objective"], "0");
    assert_eq!(v["first_stage"]["a"], "1");
    assert_eq!(v["diagnostics"]["arcs"], 19);
}

#[test]
fn solve_and_oracle_agree() {
    for f in ["split_star.json", "edge_lost.json", "stars.json"] {
        let cmd = if f == "stars.json" { "multistage" } else { "solve" };
        let a = ok_json(&[cmd, "--in", path(&data(f))]);
        let b = ok_json(&["oracle", "--in", path(&data(f))]);
        assert_eq!(a["objective"], b["objective"], "{f}");
    }
}

#[test]
fn count_vertex_covers() {
    let out = sag(&["count-vc", "--in", path(&data("k2.graph"))]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(String::from_utf8(out.stdout).unwrap().trim(), "3");
    assert_eq!(ok_json(&["count-vc", "--in", path(&data("triangle.graph"))]), 4);
}

#[test]
fn invalid_instance_exits_two_with_violations() {
    let out = sag(&["solve", "--in", path(&data("bad_probs.json"))]);
    assert_eq!(out.status.code(), Some(2));
    let v = json_of(&out);
    let fields: Vec<&str> = v["violations"].as_array().unwrap().iter().map(|x| x["field"].as_str().unwrap()).collect();
    assert!(fields.contains(&"scenarios[].prob"), "{fields:?}");
    assert!(!out.stderr.is_empty());
}

#[test]
fn missing_file_and_bad_flags_exit_two() {
    assert_eq!(sag(&["solve", "--in", "/nonexistent.json"]).status.code(), Some(2));
    assert_eq!(sag(&["solve", "--bogus"]).status.code(), Some(2));
    assert_eq!(sag(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(sag(&["--help"]).status.code(), Some(0));
}

#[test]
fn mode_override_needs_force() {
    let f = data("edge_lost.json");
    assert_eq!(sag(&["solve", "--in", path(&f), "--mode", "neg"]).status.code(), Some(2));
    assert_eq!(ok_json(&["solve", "--in", path(&f), "--mode", "abs"])["objective"], "1");
    let v = ok_json(&["solve", "--in", path(&f), "--mode", "neg", "--force"]);
    assert_eq!(v["objective"], "0");
    assert_eq!(v["mode"], "neg");
}

#[test]
fn kind_mismatch_is_rejected() {
    assert_eq!(sag(&["solve", "--in", path(&data("stars.json"))]).status.code(), Some(2));
    assert_eq!(sag(&["multistage", "--in", path(&data("split_star.json"))]).status.code(), Some(2));
    assert_eq!(sag(&["mvc", "--in", path(&data("split_star.json"))]).status.code(), Some(2));
}

#[test]
fn mvc_on_stars() {
    let v = ok_json(&["mvc", "--in", path(&data("stars.json"))]);
    assert_eq!(v["cost"], 0);
    assert_eq!(v["covers"], serde_json::json!([["a"], ["a"]]));
}

#[test]
fn eval_first_stage() {
    let v = ok_json(&["eval", "--in", path(&data("split_star.json")), "--first-stage", path(&data("split_star_y.json"))]);
    assert_eq!(v["value"], "0");
    let out = sag(&["eval", "--in", path(&data("split_star.json")), "--first-stage", path(&data("split_star_bad_y.json"))]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn saa_on_hardness_graph_is_reproducible() {
    let k2 = data("k2.graph");
    let args = [
        "saa", "--graph", "--in", path(&k2), "--accuracy", "1/4", "--confidence", "1/4", "--seed", "5",
    ];
    let a = sag(&args);
    let b = sag(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let v = json_of(&a);
    assert_eq!(v["N"], 178);
    assert_eq!(v["exact_value"], "3/4");
    assert_eq!(v["y_hat"]["alpha"], "1");
}

#[test]
fn saa_on_explicit_instance() {
    let v = ok_json(&["saa", "--in", path(&data("split_star.json")), "--samples", "20", "--seed", "1"]);
    assert_eq!(v["N"], 20);
    assert_eq!(v["exact_value"], "0");
    let out = sag(&["saa", "--in", path(&data("split_star.json")), "--samples", "20", "--accuracy", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(sag(&["saa", "--in", path(&data("split_star.json"))]).status.code(), Some(2));
}

#[test]
fn gen_is_deterministic_and_solvable() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("g.json");
    let args = ["gen", "--left", "3", "--right", "2", "--count", "3", "--seed", "9", "--mode", "pos"];
    let a = sag(&args);
    assert_eq!(a.stdout, sag(&args).stdout);
    let mut with_out: Vec<&str> = args.to_vec();
    with_out.extend(["--out", path(&f)]);
    assert_eq!(sag(&with_out).status.code(), Some(0));
    assert_eq!(std::fs::read(&f).unwrap(), a.stdout);
    let s = ok_json(&["solve", "--in", path(&f)]);
    let o = ok_json(&["oracle", "--in", path(&f)]);
    assert_eq!(s["objective"], o["objective"]);
    let m = dir.path().join("m.json");
    assert_eq!(sag(&["gen", "--multistage", "--count", "3", "--out", path(&m)]).status.code(), Some(0));
    let s = ok_json(&["multistage", "--in", path(&m)]);
    let o = ok_json(&["oracle", "--in", path(&m)]);
    assert_eq!(s["objective"], o["objective"]);
}

#[test]
fn hardness_instance_solves_to_cover_fraction() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("h.json");
    assert_eq!(sag(&["hardness", "--in", path(&data("triangle.graph")), "--out", path(&f)]).status.code(), Some(0));
    let v = ok_json(&["solve", "--in", path(&f)]);
    assert_eq!(v["objective"], "1/2");
    assert_eq!(v["scenarios"].as_array().unwrap().len(), 8);
}

#[test]
fn dump_network_writes_dot() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("net.dot");
    ok_json(&["solve", "--in", path(&data("split_star.json")), "--dump-network", path(&f)]);
    let dot = std::fs::read_to_string(&f).unwrap();
    assert!(dot.starts_with("digraph"), "{dot}");
}

#[test]
fn reports_are_byte_identical() {
    let a = sag(&["solve", "--in", path(&data("split_star.json"))]);
    let b = sag(&["solve", "--in", path(&data("split_star.json"))]);
    assert_eq!(a.stdout, b.stdout);
}
