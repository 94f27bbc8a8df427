//! The `barycenter` binary end to end.

use std::path::Path;
use std::process::{Command, Output};

use async_barycenter::mnist::{labels_to_bytes, synthetic_digits, MeasureManifest};

fn barycenter(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_barycenter")).args(args).output().expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const MINIMAL: &str = r#"{
    "topology": {"kind": "cycle", "m": 4},
    "problem": {"preset": "quadratic", "n": 2, "mu": 1.0},
    "algorithm": {"variant": "a2dwb", "gamma": 0.05, "batch": 1},
    "sim": {"horizon_s": 10.0, "activation": {"mode": "permutation", "interval_s": 0.2}}
}"#;

#[test]
fn run_writes_trace_and_reports() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, MINIMAL).unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let out = barycenter(&["run", "--config", s(&cfg), "--out", s(&a)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("final dual objective:"), "{stdout}");
    assert!(stdout.contains("final consensus distance:"), "{stdout}");
    let rows = std::fs::read_to_string(&a).unwrap().lines().count();
    assert!(rows >= 3, "header plus at least two snapshots, got {rows} lines");

    assert!(barycenter(&["run", "--config", s(&cfg), "--out", s(&b)]).status.success());
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn overrides_change_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, MINIMAL).unwrap();
    let a = dir.path().join("a.csv");
    let out = barycenter(&[
        "run", "--config", s(&cfg), "--out", s(&a), "--seed", "3", "--variant", "sync-baseline", "--horizon", "4",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&a).unwrap();
    let last = text.lines().last().unwrap();
    assert!(last.starts_with("4.0000000000000000e0,"), "{last}");
    assert!(last.contains(",sync_baseline,cycle,3,"), "{last}");
}

#[test]
fn invalid_config_names_field_and_fails() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, MINIMAL.replace("\"batch\": 1", "\"batch\": 1, \"tau_assumed\": 9")).unwrap();
    let out = barycenter(&["run", "--config", s(&cfg), "--out", s(&dir.path().join("x.csv"))]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("algorithm.tau_assumed"), "{err}");
    assert!(err.contains("tau <= m"), "{err}");
}

#[test]
fn preset_output_is_a_runnable_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = barycenter(&["preset", "quadratic", "--topology", "star", "--m", "5"]);
    assert!(out.status.success());
    let cfg = dir.path().join("p.json");
    std::fs::write(&cfg, &out.stdout).unwrap();
    let run = barycenter(&["run", "--config", s(&cfg), "--out", s(&dir.path().join("p.csv")), "--horizon", "3"]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
}

#[test]
fn mnist_prepare_then_run() {
    let dir = tempfile::tempdir().unwrap();
    let (images, labels) = synthetic_digits(120, 5);
    let img = dir.path().join("img.idx");
    let lab = dir.path().join("lab.idx");
    std::fs::write(&img, images.to_bytes()).unwrap();
    std::fs::write(&lab, labels_to_bytes(&labels)).unwrap();
    let manifest = dir.path().join("manifest.json");
    let out = barycenter(&[
        "mnist-prepare", "--images", s(&img), "--labels", s(&lab), "--digit", "7", "--count", "4", "--seed", "1",
        "--out", s(&manifest),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let parsed: MeasureManifest = serde_json::from_str(&std::fs::read_to_string(&manifest).unwrap()).unwrap();
    assert_eq!(parsed.indices.len(), 4);
    assert!(parsed.indices.iter().all(|&i| labels[i] == 7));

    let preset = barycenter(&["preset", "mnist", "--topology", "complete", "--m", "4"]);
    let text = String::from_utf8(preset.stdout).unwrap().replace("manifest.json", s(&manifest));
    let cfg = dir.path().join("m.json");
    std::fs::write(&cfg, text).unwrap();
    let run = barycenter(&["run", "--config", s(&cfg), "--out", s(&dir.path().join("m.csv")), "--horizon", "1"]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
}

#[test]
fn mnist_prepare_rejects_bad_digit() {
    let out = barycenter(&["mnist-prepare", "--images", "a", "--labels", "b", "--digit", "12", "--count", "1", "--out", "c"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn diagnostics_pass() {
    let out = barycenter(&["diagnostics"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(out.status.success(), "{text}");
    assert_eq!(text.lines().filter(|l| l.starts_with("[PASS]")).count(), 7, "{text}");
}

#[test]
fn help_documents_config_fields() {
    let out = barycenter(&["run", "--help"]);
    let text = String::from_utf8(out.stdout).unwrap();
    for key in ["algorithm.gamma", "sim.delay.probs", "eval.eval_seed", "--horizon"] {
        assert!(text.contains(key), "missing {key}");
    }
}
