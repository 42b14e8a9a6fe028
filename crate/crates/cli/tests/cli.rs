use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn corpus(name: &str) -> PathBuf {
    PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/../../corpus")).join(name)
}

fn tarski(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tarski"))
        .args(args)
        .env_remove("TARSKI_BLOCK_CACHE")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn classify_marshall() {
    let o = tarski(&["classify", path(&corpus("marshall.sexp"))]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).lines().next(), Some("True"));
}

#[test]
fn classify_krugman_prints_region() {
    let o = tarski(&["classify", path(&corpus("krugman.sexp")), "--expect", "Mixed"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert_eq!(out.lines().next(), Some("Mixed"));
    assert!(out.lines().any(|l| l.starts_with("region: (or")));
}

#[test]
fn classify_expectation_mismatch() {
    let o = tarski(&["classify", path(&corpus("hicks.sexp")), "--expect", "False"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn theorem_only() {
    let o = tarski(&["classify", "--theorem-only", path(&corpus("hicks.sexp"))]);
    assert_eq!(stdout(&o).trim(), "holds");
}

#[test]
fn decide_counterexample() {
    let f = corpus("jehle_reny_counterexample.sexp");
    let o = tarski(&["decide", path(&f)]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).trim(), "false");

    let o = tarski(&["decide", path(&f), "--expect", "true"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn pinned_trace_uses_library_blocks() {
    let o = tarski(&["decide", "--pinned", "--trace", path(&corpus("jehle_reny_counterexample.sexp"))]);
    let out = stdout(&o);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines.last(), Some(&"false"));
    let trace = &lines[..lines.len() - 1];
    assert!(!trace.is_empty());
    assert!(trace.iter().all(|l| l.contains("Block-A") || l.contains("Block-B")), "{out}");
}

#[test]
fn trace_is_deterministic() {
    let f = corpus("jehle_reny_counterexample.sexp");
    let a = tarski(&["decide", "--trace", "--order", "v12,v11,v10,v8,v2", path(&f)]);
    let b = tarski(&["decide", "--trace", "--order", "v12,v11,v10,v8,v2", path(&f)]);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn stats_krugman() {
    let o = tarski(&["stats", path(&corpus("krugman.sexp"))]);
    assert!(stdout(&o).starts_with("variables: 12 "));
    let o = tarski(&["stats", "--json", path(&corpus("krugman.sexp"))]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["variables"].as_array().unwrap().len(), 12);
}

#[test]
fn eliminate_and_equiv() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("f.sexp");
    let g = dir.path().join("g.sexp");
    std::fs::write(&f, "(assert (exists ((x Real)) (and (> x a) (< x b))))").unwrap();
    std::fs::write(&g, "(assert (< a b))").unwrap();
    let o = tarski(&["eliminate", path(&f)]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains('a'));

    let o = tarski(&["oracle", "equiv", path(&f), path(&g), "--n", "200", "--seed", "3"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    let lines: Vec<serde_json::Value> = out.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 201);
    assert!(lines[0]["point"].is_object() && lines[0]["f"].is_boolean() && lines[0]["g"].is_boolean());
    assert_eq!(lines[200]["disagreements"], 0);

    std::fs::write(&g, "(assert (<= a b))").unwrap();
    let o = tarski(&["oracle", "equiv", path(&f), path(&g), "--n", "200"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn decide_univariate() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("u.sexp");
    std::fs::write(&f, "(assert (exists ((x Real)) (and (< (- (^ x 3) 2) 0) (> x 1))))").unwrap();
    assert_eq!(stdout(&tarski(&["oracle", "decide-univariate", path(&f)])).trim(), "true");
    std::fs::write(&f, "(assert (and (< (^ x 2) 1) (> x 1)))").unwrap();
    assert_eq!(stdout(&tarski(&["oracle", "decide-univariate", path(&f)])).trim(), "false");
}

#[test]
fn blocks_gen_list_verify() {
    let dir = tempfile::tempdir().unwrap();
    let cache = path(dir.path()).to_string();
    let o = tarski(&["blocks", "gen", "--sig", "1EQ,1GT", "--block-cache", &cache]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("(signature 1 EQ 1 GT)"));
    let o = tarski(&["blocks", "list", "--block-cache", &cache]);
    let out = stdout(&o);
    assert!(out.contains("Block-A") && out.contains("cached"));
    let o = tarski(&["blocks", "verify", "--block-cache", &cache, "--n", "300"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("ok"));
}

#[test]
fn block_cache_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_tarski"))
        .args(["decide", path(&corpus("marshall.sexp"))])
        .env("TARSKI_BLOCK_CACHE", dir.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(String::from_utf8_lossy(&o.stdout).trim(), "true");
}

#[test]
fn corpus_run_and_filters() {
    let o = tarski(&["corpus", "run", "hicks"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("1/1 passed"));

    let o = tarski(&["corpus", "run", "no-such-entry"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("no entries"));

    let o = tarski(&["corpus", "run", "marshall", "--json", "--seed", "5"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["rows"][0]["pass"], true);
    assert_eq!(v["seed"], 5);
}

#[test]
fn corpus_wrong_expectation() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(corpus("marshall.sexp")).unwrap();
    std::fs::write(dir.path().join("marshall_wrong.sexp"), text.replace("; expect: True", "; expect: False")).unwrap();
    let o = tarski(&["corpus", "run", "--dir", path(dir.path())]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).lines().any(|l| l.starts_with("marshall_wrong") && l.contains("FAIL")));

    let o = tarski(&["corpus", "import", path(dir.path())]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("marshall_wrong"));
}

#[test]
fn exit_codes() {
    assert_eq!(tarski(&["decide"]).status.code(), Some(2));
    assert_eq!(tarski(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(tarski(&["decide", "/nonexistent.sexp"]).status.code(), Some(2));
    let o = tarski(&["decide", path(&corpus("jehle_reny_counterexample.sexp")), "--max-clauses", "3"]);
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(tarski(&["--help"]).status.code(), Some(0));
}
