use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use hbrb_core::io::{read_descriptors, read_vocab_text};
use sha2::{Digest, Sha256};

fn hbrb(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hbrb"))
        .args(args)
        .env_remove("HBRB_THREADS")
        .output()
        .expect("spawn hbrb")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn digest(path: &Path) -> Vec<u8> {
    Sha256::digest(fs::read(path).unwrap()).to_vec()
}

fn small_synth(dir: &Path) -> (std::path::PathBuf, std::path::PathBuf) {
    let frames = dir.join("frames.hbdc");
    let training = dir.join("train.hbdc");
    let out = hbrb(&[
        "synth",
        "--places",
        "12",
        "--per-place",
        "40",
        "--seed",
        "5",
        "--out",
        p(&frames),
        "--gt",
        p(&dir.join("gt.json")),
        "--train-out",
        p(&training),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    (frames, training)
}

#[test]
fn k_below_two_is_a_usage_error() {
    let out = hbrb(&["train", "--input", "x.hbdc", "--out", "v.txt", "--k", "1"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(out.stdout.is_empty());
    assert!(!out.stderr.is_empty());
}

#[test]
fn unknown_flag_and_strategy_are_usage_errors() {
    assert_eq!(hbrb(&["train", "--bogus"]).status.code(), Some(1));
    let out = hbrb(&[
        "train",
        "--input",
        "x",
        "--out",
        "y",
        "--strategy",
        "kmeans",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(hbrb(&[]).status.code(), Some(1));
}

#[test]
fn help_exits_zero_for_every_subcommand() {
    for sub in ["train", "transform", "query", "synth", "eval", "convert"] {
        let out = hbrb(&[sub, "--help"]);
        assert_eq!(out.status.code(), Some(0), "{sub}");
        assert!(!out.stdout.is_empty());
    }
}

#[test]
fn missing_input_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = hbrb(&[
        "train",
        "--input",
        p(&dir.path().join("none.hbdc")),
        "--out",
        p(&dir.path().join("v.txt")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.path().join("v.txt").exists());
}

#[test]
fn malformed_vocabulary_is_a_parse_error() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.txt");
    fs::write(&bad, "10 6 0 0\n5 1 1 2 3 0.5\n").unwrap();
    let out = hbrb(&[
        "convert",
        "--in",
        p(&bad),
        "--out",
        p(&dir.path().join("o.json")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
}

#[test]
fn bad_synth_parameters_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = hbrb(&[
        "synth",
        "--flip",
        "0.7",
        "--out",
        p(&dir.path().join("f")),
        "--gt",
        p(&dir.path().join("g")),
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn synth_train_eval_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let (frames, training) = small_synth(dir.path());
    assert_eq!(read_descriptors(&frames).unwrap().group_count(), 12 + 5);

    let vocab = dir.path().join("v.txt");
    let out = hbrb(&[
        "train",
        "--input",
        p(&training),
        "--out",
        p(&vocab),
        "--L",
        "2",
        "--k",
        "4",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("word_count 16"), "{stdout}");
    assert!(stdout.contains("mean_qe"));
    assert_eq!(read_vocab_text(&vocab).unwrap().word_count(), 16);

    let csv = dir.path().join("cmp.csv");
    let json = dir.path().join("cmp.json");
    let out = hbrb(&[
        "eval",
        "--places",
        "12",
        "--per-place",
        "40",
        "--k",
        "4",
        "--L",
        "2",
        "--csv",
        p(&csv),
        "--json",
        p(&json),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = fs::read_to_string(&csv).unwrap();
    let lines: Vec<_> = text.lines().collect();
    assert!(lines[0].starts_with("strategy,seed,mean_qe"));
    assert_eq!(lines.len(), 1 + 3);
    let rows: serde_json::Value = serde_json::from_slice(&fs::read(&json).unwrap()).unwrap();
    assert_eq!(rows.as_array().unwrap().len(), 3);
}

#[test]
fn eval_needs_two_strategies() {
    let out = hbrb(&[
        "eval",
        "--strategies",
        "hbrb",
        "--places",
        "4",
        "--per-place",
        "8",
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn train_is_deterministic_and_convert_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let (_, training) = small_synth(dir.path());
    let a = dir.path().join("a.txt");
    let b = dir.path().join("b.txt");
    for out in [&a, &b] {
        let r = hbrb(&[
            "train",
            "--input",
            p(&training),
            "--out",
            p(out),
            "--L",
            "3",
            "--k",
            "3",
            "--seed",
            "9",
        ]);
        assert!(r.status.success());
    }
    assert_eq!(digest(&a), digest(&b));

    let json = dir.path().join("a.json");
    let back = dir.path().join("back.txt");
    assert!(hbrb(&["convert", "--in", p(&a), "--out", p(&json)])
        .status
        .success());
    assert!(hbrb(&["convert", "--in", p(&json), "--out", p(&back)])
        .status
        .success());
    assert_eq!(fs::read(&a).unwrap(), fs::read(&back).unwrap());
}

#[test]
fn transform_and_query_emit_json() {
    let dir = tempfile::tempdir().unwrap();
    let (frames, training) = small_synth(dir.path());
    let vocab = dir.path().join("v.json");
    assert!(hbrb(&[
        "train",
        "--input",
        p(&training),
        "--out",
        p(&vocab),
        "--L",
        "2",
        "--k",
        "8"
    ])
    .status
    .success());

    let bow = dir.path().join("bow.json");
    assert!(hbrb(&[
        "transform",
        "--vocab",
        p(&vocab),
        "--input",
        p(&frames),
        "--out",
        p(&bow)
    ])
    .status
    .success());
    let bows: Vec<std::collections::BTreeMap<String, f64>> =
        serde_json::from_slice(&fs::read(&bow).unwrap()).unwrap();
    assert_eq!(bows.len(), 17);
    for v in &bows {
        let sum: f64 = v.values().sum();
        assert!((sum - 1.0).abs() < 1e-9);
    }

    let out = hbrb(&[
        "query",
        "--vocab",
        p(&vocab),
        "--db",
        p(&frames),
        "--queries",
        p(&frames),
        "--top",
        "3",
        "--exclude-window",
        "1",
    ]);
    assert!(out.status.success());
    let answers: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let answers = answers.as_array().unwrap();
    assert_eq!(answers.len(), 17);
    for (q, a) in answers.iter().enumerate() {
        assert_eq!(a["query"], q);
        let matches = a["matches"].as_array().unwrap();
        assert!(matches.len() <= 3);
        assert!(matches.iter().all(|m| m["entry"] != q));
        let scores: Vec<f64> = matches
            .iter()
            .map(|m| m["score"].as_f64().unwrap())
            .collect();
        assert!(scores.windows(2).all(|w| w[0] >= w[1]));
    }

    // Without the window each frame finds itself first.
    let out = hbrb(&[
        "query",
        "--vocab",
        p(&vocab),
        "--db",
        p(&frames),
        "--queries",
        p(&frames),
        "--top",
        "1",
    ]);
    let answers: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    for (q, a) in answers.as_array().unwrap().iter().enumerate() {
        assert_eq!(a["matches"][0]["entry"], q);
    }
}

#[test]
fn invalid_thread_count_is_rejected() {
    let out = Command::new(env!("CARGO_BIN_EXE_hbrb"))
        .args(["eval", "--help"])
        .env("HBRB_THREADS", "lots")
        .output()
        .unwrap();
    // Help is handled before the pool is configured.
    assert_eq!(out.status.code(), Some(0));
    let out = Command::new(env!("CARGO_BIN_EXE_hbrb"))
        .args(["convert", "--in", "a", "--out", "b"])
        .env("HBRB_THREADS", "lots")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}
