use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn scelmo(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_scelmo"))
        .args(args)
        .current_dir(dir)
        .env_remove("SCELMO_SEED")
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = scelmo(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn fixture(files: usize) -> TempDir {
    let dir = tempfile::tempdir().unwrap();
    let src = minijs::synth::generate(files, 4);
    fs::write(dir.path().join("corpus.jsonl"), minijs::export_jsonl(src.iter().map(|(p, s)| (p.as_str(), s.as_str())))).unwrap();
    dir
}

#[test]
fn help_lists_every_subcommand() {
    let dir = tempfile::tempdir().unwrap();
    let text = ok(dir.path(), &["--help"]);
    for cmd in [
        "export", "ingest", "extract", "mutate", "train-embeddings", "train-lm", "train-detector", "evaluate", "eval-real",
        "detect", "stats",
    ] {
        assert!(text.contains(cmd), "{cmd} missing from help");
    }
}

#[test]
fn unknown_flag_exits_two_and_names_it() {
    let dir = tempfile::tempdir().unwrap();
    let out = scelmo(dir.path(), &["ingest", "--frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--frobnicate"));
    assert_eq!(scelmo(dir.path(), &["launch"]).status.code(), Some(2));
}

#[test]
fn failures_print_one_error_line() {
    let dir = tempfile::tempdir().unwrap();
    let out = scelmo(dir.path(), &["ingest", "--in", "absent.jsonl", "--out", "c.store"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert_eq!(err.lines().count(), 1);
    assert!(err.starts_with("error: io: "), "{err}");

    fs::write(dir.path().join("bad.store"), b"NOPE").unwrap();
    let out = scelmo(dir.path(), &["extract", "--store", "bad.store", "--pattern", "swapped-args", "--out", "i.jsonl"]);
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error: format: "));

    let out = scelmo(dir.path(), &["export", "--root", ".", "--out", "x.jsonl"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn seed_falls_back_to_environment() {
    let dir = fixture(12);
    let d = dir.path();
    ok(d, &["ingest", "--in", "corpus.jsonl", "--seed", "3", "--out", "flag.store"]);
    let out = Command::new(env!("CARGO_BIN_EXE_scelmo"))
        .args(["ingest", "--in", "corpus.jsonl", "--out", "env.store"])
        .current_dir(d)
        .env("SCELMO_SEED", "3")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(fs::read(d.join("flag.store")).unwrap(), fs::read(d.join("env.store")).unwrap());
    ok(d, &["ingest", "--in", "corpus.jsonl", "--out", "default.store"]);
    assert_ne!(fs::read(d.join("flag.store")).unwrap(), fs::read(d.join("default.store")).unwrap());
}

#[test]
fn pipeline_smoke() {
    let dir = fixture(16);
    let d = dir.path();
    ok(d, &["ingest", "--in", "corpus.jsonl", "--dedup", "--train-frac", "0.66", "--out", "c.store"]);
    assert_eq!(&fs::read(d.join("c.store")).unwrap()[..4], b"SCBD");
    ok(d, &["extract", "--store", "c.store", "--pattern", "wrong-operator", "--out", "ops.jsonl"]);
    let mutated = ok(d, &["mutate", "--in", "ops.jsonl", "--out", "ops-data.jsonl"]);
    let stats: serde_json::Value = serde_json::from_str(&mutated).unwrap();
    assert_eq!(stats["correct"], stats["buggy"]);
    let header: serde_json::Value =
        serde_json::from_str(fs::read_to_string(d.join("ops-data.jsonl")).unwrap().lines().next().unwrap()).unwrap();
    assert_eq!(header["config"]["seed"], 7);
    assert_eq!(header["config"]["mutation"]["seed"], 7);

    ok(d, &["train-lm", "--store", "c.store", "--layers", "1", "--dim", "8", "--epochs", "1", "--seq-len", "40", "--out", "lm.sclm"]);
    ok(d, &[
        "train-detector", "--pattern", "wrong-operator", "--mode", "scelmo", "--lm", "lm.sclm", "--dataset", "ops-data.jsonl",
        "--store", "c.store", "--epochs", "2", "--out", "scelmo.scdt",
    ]);
    let report: serde_json::Value =
        serde_json::from_str(&ok(d, &["evaluate", "--model", "scelmo.scdt", "--dataset", "ops-data.jsonl", "--store", "c.store"]))
            .unwrap();
    let acc = report["accuracy"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&acc));
    assert_eq!(report["positives"], report["negatives"]);

    ok(d, &["extract", "--store", "c.store", "--pattern", "swapped-args", "--out", "calls.jsonl"]);
    ok(d, &["mutate", "--in", "calls.jsonl", "--out", "calls-data.jsonl"]);
    ok(d, &["train-embeddings", "--store", "c.store", "--method", "cbow", "--dim", "8", "--epochs", "1", "--out", "cbow.scem"]);
    ok(d, &[
        "train-detector", "--pattern", "swapped-args", "--mode", "cbow", "--embeddings", "cbow.scem", "--dataset",
        "calls-data.jsonl", "--epochs", "2", "--out", "cbow.scdt",
    ]);
    ok(d, &["evaluate", "--model", "cbow.scdt", "--dataset", "calls-data.jsonl"]);
    let table = ok(d, &["stats", "oov", "--instances", "calls.jsonl", "--vocab", "cbow.scem", "--format", "md"]);
    assert_eq!(table.lines().count(), 21);
    assert!(table.contains("Both Arguments OOV"));

    let detected = ok(d, &["detect", "--model", "cbow.scdt", "--file", "corpus.jsonl", "--threshold", "0"]);
    let first: serde_json::Value = serde_json::from_str(detected.lines().next().unwrap()).unwrap();
    assert!(first["file"].is_string() && first["span"].is_array() && first["probability"].is_f64());

    let pair = serde_json::json!({
        "id": "p1",
        "pattern": "swapped_args",
        "buggy": minijs::export_source("b.js", "setSize(height, width);\n"),
        "fixed": minijs::export_source("f.js", "setSize(width, height);\n"),
    });
    fs::write(d.join("real.jsonl"), format!("{pair}\nnot json\n")).unwrap();
    let real: serde_json::Value =
        serde_json::from_str(&ok(d, &["eval-real", "--model", "cbow.scdt", "--pairs", "real.jsonl", "--threshold", "0.75"]))
            .unwrap();
    assert_eq!(real["positives"], 1);
    assert_eq!(real["skipped"], 1);
}

#[test]
fn stages_are_bit_reproducible() {
    let dir = fixture(10);
    let d = dir.path();
    for tag in ["a", "b"] {
        ok(d, &["ingest", "--in", "corpus.jsonl", "--out", &format!("{tag}.store")]);
        ok(d, &["extract", "--store", &format!("{tag}.store"), "--pattern", "wrong-operand", "--out", &format!("{tag}.i")]);
        ok(d, &["mutate", "--in", &format!("{tag}.i"), "--out", &format!("{tag}.d")]);
        ok(d, &["train-embeddings", "--store", &format!("{tag}.store"), "--method", "fasttext", "--dim", "6", "--epochs", "1", "--out", &format!("{tag}.scem")]);
    }
    for ext in ["store", "i", "d", "scem"] {
        let a = fs::read(d.join(format!("a.{ext}"))).unwrap();
        let b = fs::read(d.join(format!("b.{ext}"))).unwrap();
        if ext == "store" || ext == "scem" {
            assert_eq!(a, b, "{ext}");
        } else {
            // headers record the input file name
            let strip = |v: &[u8]| String::from_utf8(v.to_vec()).unwrap().lines().skip(1).collect::<Vec<_>>().join("\n");
            assert_eq!(strip(&a), strip(&b), "{ext}");
        }
    }
}
