use std::io::Write;
use std::process::{Command, Output, Stdio};

fn ccss(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ccss")).args(args).env_remove("CCSS_MAX_STATES").output().unwrap()
}

fn model(name: &str) -> String {
    format!("{}/../../models/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn lts_json_of_example1() {
    let out = ccss(&["lts", &model("example1.ccss"), "--json"]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["states"].as_array().unwrap().len(), 2);
    assert_eq!(v["transitions"].as_array().unwrap().len(), 2);
    let again = ccss(&["lts", &model("example1.ccss"), "--json"]);
    assert_eq!(out.stdout, again.stdout);
}

#[test]
fn lts_dot() {
    let out = ccss(&["lts", &model("example2.ccss"), "--dot"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).starts_with("digraph"));
}

#[test]
fn liveness_exit_codes() {
    let ok = ccss(&["verify", "--liveness", "--model", "peterson2", "--flavor", "ccss"]);
    assert_eq!(ok.status.code(), Some(0));
    assert!(stdout(&ok).contains("exhaustive"));
    let bad = ccss(&["verify", "--liveness", "--model", "peterson2", "--flavor", "ccs"]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(stdout(&bad).contains("lasso"));
}

#[test]
fn liveness_json_verdict() {
    let out = ccss(&["verify", "--liveness", "--json", &model("peterson2-ccs.ccss")]);
    assert_eq!(out.status.code(), Some(1));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["outcome"], "violated");
    assert_eq!(v["counterexample"]["justness"]["just"], true);
}

#[test]
fn safety_from_file() {
    let out = ccss(&["verify", "--safety", &model("filter3-ccss.ccss")]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn budget_exhaustion_is_unknown() {
    let out = ccss(&["verify", "--liveness", "--model", "peterson2", "--max-checks", "1"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stdout(&out).contains("bounded"));
}

#[test]
fn state_limit_from_environment() {
    let out = Command::new(env!("CARGO_BIN_EXE_ccss"))
        .args(["verify", "--safety", "--model", "filter"])
        .env("CCSS_MAX_STATES", "10")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn usage_errors() {
    assert_eq!(ccss(&["verify", "--model", "peterson2"]).status.code(), Some(2));
    assert_eq!(ccss(&["verify", "--safety", "--model", "filter", "--n", "9"]).status.code(), Some(2));
    assert_eq!(ccss(&["parse", "no/such/file.ccss"]).status.code(), Some(2));
    assert_eq!(ccss(&["verify", "--safety", &model("example1.ccss")]).status.code(), Some(2));
}

#[test]
fn just_flips_with_signals() {
    let ex1 = ccss(&["just", &model("example1.ccss"), "--lasso", "0;0"]);
    assert_eq!(ex1.status.code(), Some(0));
    let ex2 = ccss(&["just", &model("example2.ccss"), "--lasso", "0;0"]);
    assert_eq!(ex2.status.code(), Some(1));
    assert!(stdout(&ex2).contains("par-handshake"));
}

#[test]
fn bisim_of_the_two_examples() {
    let out = ccss(&["bisim", &model("example1.ccss"), &model("example2.ccss")]);
    assert_eq!(out.status.code(), Some(0));
    let out = ccss(&["bisim", &model("example1.ccss"), &model("dekker-variable.ccss")]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn gen_then_parse() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bakery.ccss");
    let path = path.to_str().unwrap();
    let out = ccss(&["gen", "--model", "bakery", "--n", "2", "--ticket-bound", "3", "-o", path]);
    assert_eq!(out.status.code(), Some(0));
    let printed = ccss(&["parse", path]);
    assert_eq!(printed.status.code(), Some(0));
    let file = std::fs::read_to_string(path).unwrap();
    let body: String = file.lines().skip(1).map(|l| format!("{l}\n")).collect();
    assert_eq!(stdout(&printed), body);
}

#[test]
fn step_repl() {
    let mut child = Command::new(env!("CARGO_BIN_EXE_ccss"))
        .args(["step", &model("example2.ccss")])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(b"1\nsignals\nundo\nquit\n").unwrap();
    let out = child.wait_with_output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("reading from"));
    assert!(text.contains("(x_false | R | 0)"));
    assert!(text.contains("no transitions"));
    assert_eq!(text.matches("signals: {}").count(), 4);
}

#[test]
fn step_shows_signals_until_the_emitter_moves() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.ccss");
    std::fs::write(&path, "signals { s }\nsystem = (a.0) ^ s | s.b.0").unwrap();
    let mut child = Command::new(env!("CARGO_BIN_EXE_ccss"))
        .args(["step", path.to_str().unwrap()])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(b"0\n").unwrap();
    let text = stdout(&child.wait_with_output().unwrap());
    let prompts: Vec<&str> = text.lines().filter(|l| l.starts_with("signals:")).collect();
    assert_eq!(prompts, ["signals: {s}", "signals: {}"]);
}
