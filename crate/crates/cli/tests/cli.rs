use std::process::{Command, Output};

use serde_json::Value;

fn rnl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rnl"))
        .args(args)
        .env_remove("RNL_SEED")
        .output()
        .expect("spawn rnl")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn f(v: &Value) -> f64 {
    v.as_str().unwrap().parse().unwrap()
}

#[test]
fn certify_heisenberg() {
    let out = rnl(&["certify", "-a", "heisenberg:3", "-d", "[1,1,2]"]);
    assert_eq!(code(&out), 0);
    let v = json(&out);
    assert_eq!(v["certified"], true);
    let cert = &v["certificate"];
    assert_eq!(cert["exact"]["margin"], "3/2");
    assert_eq!(cert["metric"]["negative"], true);
    assert!(f(&cert["metric"]["lambda_max"]) < 0.0);
}

#[test]
fn tricky5_not_nice() {
    let out = rnl(&["nice", "-a", "tricky5"]);
    assert_eq!(code(&out), 0);
    let v = json(&out);
    assert_eq!(v["nice"], false);
    assert!(!v["violations"].as_array().unwrap().is_empty());
}

#[test]
fn heisenberg5_exact_section_is_an_octagon() {
    let out = rnl(&["cone", "-a", "heisenberg:5", "--exact"]);
    assert_eq!(code(&out), 0);
    let v = json(&out);
    assert_eq!(v["exactness"], "exact");
    assert_eq!(v["dim"], 2);
    assert_eq!(v["vertices"].as_array().unwrap().len(), 8);
    assert_eq!(v["weyl_report"]["invariant"], true);
}

#[test]
fn numbers_have_17_digits() {
    let v = json(&rnl(&["ricci", "-a", "heisenberg:3"]));
    let s = v["scalar"].as_str().unwrap();
    assert_eq!(s, "-5.0000000000000000e-1");
    let mantissa: String = s.split('e').next().unwrap().chars().filter(char::is_ascii_digit).collect();
    assert_eq!(mantissa.len(), 17);
}

#[test]
fn exit_codes() {
    assert_eq!(code(&rnl(&["bogus"])), 1);
    assert_eq!(code(&rnl(&["nice", "-a", "no-such-algebra"])), 1);
    assert_eq!(code(&rnl(&["certify", "-a", "heisenberg:3", "-d", "[1,1]"])), 2);
    assert_eq!(code(&rnl(&["certify", "-a", "heisenberg:3", "-d", "[-1,-1,-2]", "--method", "nice-lp"])), 2);
    assert_eq!(code(&rnl(&["cone", "-a", "tricky5", "--exact"])), 2);
    assert_eq!(code(&rnl(&["degenerate", "--curve", "milnor-heis"])), 2);
    assert_eq!(code(&rnl(&["degenerate", "--curve", "milnor-heis", "--predicate", "scalar-negative"])), 0);
    assert_eq!(code(&rnl(&["--jobs", "0", "corpus"])), 1);
}

#[test]
fn trace_nonpositive_is_out() {
    let out = rnl(&["cone", "-a", "heisenberg:3", "-d", "[1,-1,0]"]);
    assert_eq!(code(&out), 0);
    assert_eq!(json(&out)["verdict"], "Out");
}

#[test]
fn seed_is_deterministic() {
    let args = ["orbit-sample", "-a", "filiform:5", "--count", "6", "--seed", "11"];
    let a = rnl(&args);
    let b = rnl(&args);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);

    let env = Command::new(env!("CARGO_BIN_EXE_rnl"))
        .args(&args[..5])
        .env("RNL_SEED", "11")
        .output()
        .unwrap();
    assert_eq!(env.stdout, a.stdout);

    let other = rnl(&["orbit-sample", "-a", "filiform:5", "--count", "6", "--seed", "12"]);
    assert_ne!(other.stdout, a.stdout);
}

#[test]
fn jobs_do_not_change_output() {
    let one = rnl(&["--jobs", "1", "cone", "-a", "tricky5", "--format", "csv"]);
    let four = rnl(&["--jobs", "4", "cone", "-a", "tricky5", "--format", "csv"]);
    assert_eq!(code(&one), 0);
    assert_eq!(one.stdout, four.stdout);
    let text = String::from_utf8(one.stdout).unwrap();
    assert!(text.starts_with("vertex,x1,x2,d1,d2,d3,d4,d5\n"));
}

#[test]
fn corpus_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("tricky5.json");
    let out = rnl(&["corpus", "tricky5"]);
    assert_eq!(code(&out), 0);
    std::fs::write(&path, &out.stdout).unwrap();
    let p = path.to_str().unwrap();
    let from_file = rnl(&["moment", "-a", p]);
    let from_corpus = rnl(&["moment", "-a", "tricky5"]);
    assert_eq!(code(&from_file), 0);
    assert_eq!(from_file.stdout, from_corpus.stdout);
}

#[test]
fn malformed_file_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, "{\"dim\": 3}").unwrap();
    assert_eq!(code(&rnl(&["nice", "-a", path.to_str().unwrap()])), 1);
}

#[test]
fn moment_trace_is_minus_one() {
    let v = json(&rnl(&["moment", "-a", "filiform:5", "--basis-change", "[[1,1,0,0,0],[0,2,0,0,0],[0,0,1,0,0],[0,0,0,1,0],[0,0,0,1,1]]"]));
    let t: f64 = v["diagonal"].as_array().unwrap().iter().map(f).sum();
    assert!((t + 1.0).abs() < 1e-12);
}
