use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use betalink::estimators::{bayes_partial, LossConfig};
use betalink::io;
use betalink::review::{DecisionLog, ReviewChoice, ReviewDecision};

fn betalink(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_betalink")).args(args).output().unwrap()
}

fn ok(args: &[&str]) {
    let out = betalink(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Every stage from simulation to evaluation, outputs under `root`.
fn pipeline(root: &Path) {
    let d = |name: &str| root.join(name);
    ok(&["simulate", "--records", "80", "--overlap", "0.5", "--errors", "2", "--seed", "11", "--out", s(&d("sim"))]);
    ok(&[
        "compare",
        "--input",
        s(&d("sim/file1.csv")),
        s(&d("sim/file2.csv")),
        "--config",
        s(&d("sim/config.toml")),
        "--out",
        s(&d("cmp")),
    ]);
    let cmp = d("cmp/comparisons.csv");
    ok(&["em", "--input", s(&cmp), "--out", s(&d("em"))]);
    ok(&["mle", "--input", s(&cmp), "--params", s(&d("em/em.json")), "--out", s(&d("mle"))]);
    ok(&["fsrule", "--input", s(&cmp), "--params", s(&d("em/em.json")), "--out", s(&d("fs"))]);
    ok(&[
        "gibbs",
        "--input",
        s(&cmp),
        "--config",
        s(&d("sim/config.toml")),
        "--iterations",
        "300",
        "--burn-in",
        "50",
        "--seed",
        "5",
        "--out",
        s(&d("gibbs")),
    ]);
    ok(&["estimate", "--input", s(&d("gibbs/posterior.csv")), "--out", s(&d("est"))]);
    ok(&[
        "evaluate",
        "--input",
        s(&d("est/estimate.csv")),
        "--truth",
        s(&d("sim/truth.csv")),
        "--overlap",
        s(&d("gibbs/overlap.csv")),
        "--out",
        s(&d("eval")),
    ]);
}

fn outputs(root: &Path) -> Vec<PathBuf> {
    let mut files = Vec::new();
    for stage in fs::read_dir(root).unwrap() {
        for f in fs::read_dir(stage.unwrap().path()).unwrap() {
            let p = f.unwrap().path();
            if !p.to_string_lossy().ends_with(".meta.json") {
                files.push(p.strip_prefix(root).unwrap().to_path_buf());
            }
        }
    }
    files.sort();
    files
}

#[test]
fn pipeline_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    pipeline(a.path());
    pipeline(b.path());
    let files = outputs(a.path());
    assert_eq!(files, outputs(b.path()));
    assert_eq!(files.len(), 13);
    for f in &files {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{}", f.display());
    }

    let meta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(a.path().join("gibbs/gibbs.meta.json")).unwrap()).unwrap();
    assert_eq!(meta["stage"], "gibbs");
    assert_eq!(meta["seed"], 5);
    assert_eq!(meta["details"]["chain"]["retained"], 250);
    assert!(meta["elapsed_ms"].is_u64());
}

#[test]
fn estimate_stage_matches_library() {
    let dir = tempfile::tempdir().unwrap();
    pipeline(dir.path());
    let marg = io::parse_posterior(&fs::read_to_string(dir.path().join("gibbs/posterior.csv")).unwrap()).unwrap();
    let expected = bayes_partial(&marg, &LossConfig::default_partial()).unwrap();
    let written = io::parse_estimate(&fs::read_to_string(dir.path().join("est/estimate.csv")).unwrap()).unwrap();
    assert_eq!(written.estimator, expected.estimator);
    assert_eq!(written.decisions().collect::<Vec<_>>(), expected.decisions().collect::<Vec<_>>());
    for (w, e) in written.entries.iter().zip(&expected.entries) {
        for (x, y) in [(w.prob, e.prob), (w.loss, e.loss)] {
            match (x, y) {
                (Some(x), Some(y)) => assert!((x - y).abs() <= 1e-12 * y.abs().max(1.0)),
                (x, y) => assert_eq!(x, y),
            }
        }
    }

    let eval: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("eval/evaluation.json")).unwrap()).unwrap();
    assert!(eval["report"].is_object());
    assert!(eval["overlap"].is_object());

    let swapped = dir.path().join("swapped");
    ok(&[
        "compare",
        "--input",
        s(&dir.path().join("sim/file2.csv")),
        s(&dir.path().join("sim/file1.csv")),
        "--config",
        s(&dir.path().join("sim/config.toml")),
        "--out",
        s(&swapped),
    ]);
    let meta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(swapped.join("compare.meta.json")).unwrap()).unwrap();
    assert_eq!(meta["details"]["swapped"], false);
}

#[test]
fn merge_applies_logged_decisions() {
    let dir = tempfile::tempdir().unwrap();
    pipeline(dir.path());
    let est_path = dir.path().join("est/estimate.csv");
    let est = io::parse_estimate(&fs::read_to_string(&est_path).unwrap()).unwrap();
    let rejected: Vec<usize> =
        est.decisions().enumerate().filter(|(_, d)| *d == betalink::estimators::Decision::Reject).map(|(j, _)| j + 1).collect();
    assert!(!rejected.is_empty());
    let log_path = dir.path().join("decisions.ndjson");
    let mut log = DecisionLog::open(&log_path).unwrap();
    log.append(&ReviewDecision { task: rejected[0], choice: ReviewChoice::NonLink, note: None, timestamp_ms: None, supersede: false })
        .unwrap();
    drop(log);
    ok(&["merge", "--input", s(&est_path), "--log", s(&log_path), "--out", s(&dir.path().join("merged"))]);
    let merged = io::parse_estimate(&fs::read_to_string(dir.path().join("merged/merged.csv")).unwrap()).unwrap();
    assert_eq!(merged.decision(rejected[0] - 1), betalink::estimators::Decision::NonLink);
    assert_eq!(merged.rejections(), rejected.len() - 1);
}

#[test]
fn failures_name_the_stage() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.csv");
    let out = betalink(&["em", "--input", s(&missing), "--out", s(&dir.path().join("em"))]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("stage `em` failed"), "{err}");
    assert!(err.contains("nope.csv"), "{err}");

    let out = betalink(&["simulate", "--errors", "9", "--out", s(&dir.path().join("sim"))]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("stage `simulate` failed"));

    fs::write(dir.path().join("post.csv"), "j,i,prob\n").unwrap();
    let out = betalink(&["estimate", "--input", s(&dir.path().join("post.csv")), "--out", s(&dir.path().join("e"))]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("stage `estimate` failed"));
}
