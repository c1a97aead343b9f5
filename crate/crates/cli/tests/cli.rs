use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn zsbir(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_zsbir"))
        .args(args)
        .output()
        .expect("spawn zsbir")
}

fn ok(args: &[&str]) -> String {
    let out = zsbir(args);
    assert!(
        out.status.success(),
        "zsbir {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn small_dataset(dir: &Path) {
    ok(&[
        "synth",
        "--out",
        s(dir),
        "--seed",
        "3",
        "--train-classes",
        "5",
        "--test-classes",
        "3",
        "--d-img",
        "8",
        "--d-sketch",
        "6",
        "--pairs-per-class",
        "12",
        "--db-per-class",
        "10",
    ]);
}

fn jsonl(path: &Path) -> Vec<Value> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

#[test]
fn synth_writes_a_consistent_dataset() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    small_dataset(&data);
    for f in [
        "pairs_sketch.zsfv",
        "pairs_image.zsfv",
        "pairs.labels",
        "db.zsfv",
        "db.labels",
        "split.json",
        "queries.zsfv",
        "queries.labels",
        "db_test.zsfv",
        "db_test.labels",
        "synth.json",
    ] {
        assert!(data.join(f).exists(), "{f} missing");
    }
    let split: Value = serde_json::from_str(&fs::read_to_string(data.join("split.json")).unwrap()).unwrap();
    let test: Vec<&str> = split["test_classes"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    assert_eq!(test.len(), 3);
    let queries = fs::read_to_string(data.join("queries.labels")).unwrap();
    assert_eq!(queries.lines().count(), 36);
    assert!(queries.lines().all(|l| test.contains(&l)));
}

#[test]
fn train_and_eval_every_model() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    small_dataset(&data);
    let models: &[(&str, &[&str])] = &[
        ("cvae", &["--epochs", "2", "--hidden", "16"]),
        ("caae", &["--iterations", "2", "--disc-iters", "2", "--hidden", "16"]),
        ("siamese1", &["--epochs", "1", "--hidden", "16", "--embed-dim", "8"]),
        ("siamese2", &["--epochs", "1", "--hidden", "16", "--embed-dim", "8"]),
        ("triplet-coarse", &["--epochs", "1", "--hidden", "16", "--embed-dim", "8"]),
        ("triplet-fine", &["--epochs", "1", "--hidden", "16", "--embed-dim", "8"]),
        ("regression", &[]),
        ("eszsl", &[]),
        ("sae", &[]),
    ];
    for (model, extra) in models {
        let ck = tmp.path().join(format!("{model}.ck"));
        let mut args = vec!["train", "--data", s(&data), "--model", model, "--out", s(&ck), "--seed", "1"];
        args.extend_from_slice(extra);
        ok(&args);
        let trace = jsonl(&tmp.path().join(format!("{model}.ck.trace.jsonl")));
        assert_eq!(trace[0]["run"]["model"], *model);
        assert!(trace.len() >= 2, "{model} trace too short");

        let metrics = tmp.path().join(format!("{model}.metrics.jsonl"));
        let stdout = ok(&[
            "eval",
            "--checkpoint",
            s(&ck),
            "--queries",
            s(&data.join("queries.zsfv")),
            "--query-labels",
            s(&data.join("queries.labels")),
            "--db",
            s(&data.join("db_test.zsfv")),
            "--db-labels",
            s(&data.join("db_test.labels")),
            "--split",
            s(&data.join("split.json")),
            "--out",
            s(&metrics),
            "--seed",
            "2",
            "--samples",
            "10",
            "--clusters",
            "2",
            "--cutoff",
            "20",
        ]);
        assert!(stdout.contains("mAP@20"), "{stdout}");
        let lines = jsonl(&metrics);
        assert_eq!(lines.len(), 37);
        let summary = &lines[36]["summary"];
        let map = summary["map_at_k"].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&map));
        assert_eq!(summary["run"]["seed"], "2");
        assert!(summary["map_definition"].as_str().unwrap().contains("min(R, k)"));
    }
}

#[test]
fn retrieve_is_reproducible_and_thread_independent() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    small_dataset(&data);
    let ck = tmp.path().join("cvae.ck");
    ok(&["train", "--data", s(&data), "--model", "cvae", "--out", s(&ck), "--seed", "4", "--epochs", "2", "--hidden", "16"]);
    let (queries, db) = (data.join("queries.zsfv"), data.join("db_test.zsfv"));
    let run = |out: &Path, extra: &[&str]| {
        let mut args = vec![
            "retrieve",
            "--checkpoint",
            s(&ck),
            "--queries",
            s(&queries),
            "--db",
            s(&db),
            "--out",
            s(out),
            "--seed",
            "9",
            "--samples",
            "20",
            "--cutoff",
            "15",
        ];
        args.extend_from_slice(extra);
        ok(&args);
        // drop the run echo, which records the output path
        jsonl(out).split_off(1)
    };
    let a = run(&tmp.path().join("a.jsonl"), &[]);
    let b = run(&tmp.path().join("b.jsonl"), &[]);
    let c = run(&tmp.path().join("c.jsonl"), &["--sequential"]);
    assert_eq!(a, b);
    assert_eq!(a, c);
    assert_eq!(a.len(), 36);
    assert_eq!(a[0]["indices"].as_array().unwrap().len(), 15);
}

#[test]
fn overlapping_split_is_rejected_with_class_names() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    small_dataset(&data);
    let bad = tmp.path().join("bad.json");
    fs::write(
        &bad,
        r#"{"train_classes":["class000","class001","class002","class003","class004","class005"],
            "test_classes":["class005","class006","class007"]}"#,
    )
    .unwrap();
    let out = zsbir(&[
        "train", "--data", s(&data), "--split", s(&bad), "--model", "sae", "--out", s(&tmp.path().join("x.ck")), "--seed", "1",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("class005"), "{err}");
    assert!(!tmp.path().join("x.ck").exists());
}

#[test]
fn eval_guard_refuses_training_classes() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    small_dataset(&data);
    let ck = tmp.path().join("sae.ck");
    ok(&["train", "--data", s(&data), "--model", "sae", "--out", s(&ck), "--seed", "1"]);
    let out = zsbir(&[
        "eval",
        "--checkpoint",
        s(&ck),
        "--queries",
        s(&data.join("queries.zsfv")),
        "--query-labels",
        s(&data.join("queries.labels")),
        "--db",
        s(&data.join("db.zsfv")),
        "--db-labels",
        s(&data.join("db.labels")),
        "--split",
        s(&data.join("split.json")),
        "--out",
        s(&tmp.path().join("m.jsonl")),
        "--seed",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("split violation"));
}

#[test]
fn numerical_failures_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    // fewer training pairs than sketch dimensions: the unregularized Gram is singular
    ok(&["synth", "--out", s(&data), "--seed", "1", "--train-classes", "4", "--pairs-per-class", "1", "--d-sketch", "8"]);
    let out = zsbir(&[
        "train", "--data", s(&data), "--model", "regression", "--ridge", "0", "--out", s(&tmp.path().join("r.ck")), "--seed", "1",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("ridge"));

    let out = zsbir(&[
        "train", "--data", s(&data), "--model", "cvae", "--lr", "1e200", "--epochs", "2", "--out", s(&tmp.path().join("c.ck")), "--seed", "1",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("diverged"));
}

#[test]
fn bad_inputs_exit_1() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(zsbir(&["train", "--bogus"]).status.code(), Some(1));
    assert_eq!(zsbir(&["--help"]).status.code(), Some(0));
    let missing = zsbir(&["train", "--data", s(&tmp.path().join("nope")), "--model", "sae", "--out", "x", "--seed", "1"]);
    assert_eq!(missing.status.code(), Some(1));

    let junk = tmp.path().join("junk.ck");
    fs::write(&junk, b"not a checkpoint").unwrap();
    let feats = tmp.path().join("q.zsfv");
    fs::write(&feats, b"ZSFV").unwrap();
    let out = zsbir(&[
        "retrieve", "--checkpoint", s(&junk), "--queries", s(&feats), "--db", s(&feats), "--out", s(&tmp.path().join("o")), "--seed", "1",
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn gradcheck_passes_and_detects_corruption() {
    let out = ok(&["gradcheck", "--seed", "5"]);
    assert_eq!(out.lines().filter(|l| l.ends_with("pass")).count(), 9);
    let bad = zsbir(&["gradcheck", "--seed", "5", "--corrupt", "cvae-bound"]);
    assert_eq!(bad.status.code(), Some(1));
    let err = String::from_utf8_lossy(&bad.stderr);
    assert!(err.contains("cvae-bound"), "{err}");
    assert!(String::from_utf8_lossy(&bad.stdout).contains("FAIL"));
}
