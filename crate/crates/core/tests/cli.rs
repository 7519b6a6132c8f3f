use std::path::Path;
use std::process::Command;

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_lcc-refute"))
}

fn run(dir: &Path, args: &[&str]) -> (i32, String) {
    let out = bin().current_dir(dir).args(args).output().unwrap();
    (out.status.code().unwrap_or(-1), String::from_utf8_lossy(&out.stdout).into_owned())
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn generated_family_validates() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _) = run(dir.path(), &["gen", "--kind", "random", "--n", "60", "--m", "6", "--seed", "3", "-o", "fam.json"]);
    assert_eq!(code, 0);
    let (code, out) = run(dir.path(), &["validate", "fam.json"]);
    assert_eq!(code, 0);
    let doc: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(doc["ok"], true);
    assert_eq!(doc["result"]["n"], 60);
    assert_eq!(doc["version"], lcc_refute::VERSION);
}

#[test]
fn refute_writes_sound_certificate() {
    let dir = tempfile::tempdir().unwrap();
    run(dir.path(), &["gen", "--kind", "random", "--n", "60", "--m", "6", "--seed", "3", "-o", "fam.json"]);
    let args = ["refute", "fam.json", "--r", "1", "--ell", "2", "--d", "4", "--trials", "16", "--seed", "9", "-o", "cert.json"];
    let (code, _) = run(dir.path(), &args);
    assert_eq!(code, 0);
    let cert = read_json(&dir.path().join("cert.json"));
    assert_eq!(cert["sound"], true);
    assert_eq!(cert["config"]["args"]["refute"]["seed"], 9);
    assert_eq!(cert["config"]["args"]["refute"]["ell"], 2);
    assert!(cert["config"]["global"]["max_chains"].is_u64());
}

#[test]
fn bruteforce_value_matches_eval_at_argmax() {
    let dir = tempfile::tempdir().unwrap();
    run(dir.path(), &["gen", "--kind", "flat-lcc", "--dim", "4", "-o", "flat.json"]);
    let (code, out) = run(dir.path(), &["bruteforce", "flat.json", "--r", "1", "--b-seed", "5"]);
    assert_eq!(code, 0);
    let doc: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(doc["result"]["val"], doc["result"]["eval_at_argmax"]);
    assert!(doc["result"]["constraints"].as_u64().unwrap() > 0);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    run(dir.path(), &["gen", "--kind", "random", "--n", "30", "--m", "4", "-o", "fam.json"]);
    assert_eq!(run(dir.path(), &["validate", "fam.json", "--no-such-flag"]).0, 1);
    assert_eq!(run(dir.path(), &["frobnicate"]).0, 1);
    assert_eq!(run(dir.path(), &["--help"]).0, 0);
    assert_eq!(run(dir.path(), &["chains", "fam.json", "--t", "3", "--max-chains", "5", "--dump", "c.txt"]).0, 2);

    std::fs::write(dir.path().join("broken.json"), "{\"n\": 2,\n \"matchings\": [[[0, 1]]]}").unwrap();
    let out = bin().current_dir(dir.path()).args(["validate", "broken.json"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    std::fs::write(dir.path().join("trunc.json"), "{\"n\": 2,\n \"matchings\": [[").unwrap();
    let out = bin().current_dir(dir.path()).args(["validate", "trunc.json"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
}

#[test]
fn overlapping_matching_fails_validation() {
    let dir = tempfile::tempdir().unwrap();
    let fam = r#"{"n": 6, "matchings": [[[1, 2, 3], [3, 4, 5]], [], [], [], [], []]}"#;
    std::fs::write(dir.path().join("f.json"), fam).unwrap();
    let (code, out) = run(dir.path(), &["validate", "f.json"]);
    assert_eq!(code, 1);
    let doc: Value = serde_json::from_str(&out).unwrap();
    assert!(!doc["result"]["violations"].as_array().unwrap().is_empty());
}

#[test]
fn reports_are_byte_identical_and_summarized() {
    let dir = tempfile::tempdir().unwrap();
    run(dir.path(), &["gen", "--kind", "planted", "--dim", "3", "--seed", "2", "-o", "p.json"]);
    let mut runs = Vec::new();
    for _ in 0..2 {
        let (code, _) = run(dir.path(), &["refute", "p.json", "--seed", "4", "--trials", "3", "-o", "a.json", "--csv", "chain.csv"]);
        assert_eq!(code, 0);
        runs.push(std::fs::read(dir.path().join("a.json")).unwrap());
    }
    assert_eq!(runs[0], runs[1]);
    let csv = std::fs::read_to_string(dir.path().join("chain.csv")).unwrap();
    assert!(csv.starts_with("inequality,lhs,rhs,holds"));

    let (code, _) = run(dir.path(), &["decompose", "p.json", "--r", "2", "--d", "2", "-o", "d.json", "--csv", "d.csv"]);
    assert_eq!(code, 0);
    assert_eq!(std::fs::read_to_string(dir.path().join("d.csv")).unwrap().lines().count(), 4);
    let (code, out) = run(dir.path(), &["report", "a.json", "d.json", "--csv", "s.csv"]);
    assert_eq!(code, 0);
    let doc: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(doc["result"]["reports"].as_array().unwrap().len(), 2);
}

#[test]
fn concentration_and_threads_env() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .current_dir(dir.path())
        .env("LCC_REFUTE_THREADS", "1")
        .args(["concentration", "--r", "2", "--n", "10", "--monomials", "40", "--trials", "5000", "--beta", "2"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let doc: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["config"]["global"]["threads"], 1);
    assert_eq!(doc["result"]["holds"], true);
}
