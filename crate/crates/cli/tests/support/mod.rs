#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub const WORKER_VISIBLE_FORBIDDEN: &[&str] = &["pair", "counterfactual", "role", "probe", "original", "filler"];

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn cfprobe(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cfprobe"))
        .args(args)
        .output()
        .expect("binary runs")
}

/// Runs the binary and panics with its stderr on failure.
pub fn cfprobe_ok(args: &[&str]) -> Output {
    let out = cfprobe(args);
    assert!(
        out.status.success(),
        "cfprobe {} failed:\n{}",
        args.join(" "),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

pub fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// File contents with every `"timestamp": N` value zeroed.
pub fn without_timestamps(path: &Path) -> String {
    let text = fs::read_to_string(path).unwrap();
    let mut out = String::with_capacity(text.len());
    let mut rest = text.as_str();
    while let Some(i) = rest.find("\"timestamp\":") {
        let (head, tail) = rest.split_at(i + "\"timestamp\":".len());
        out.push_str(head);
        let tail = tail.trim_start();
        let end = tail.find(|c: char| !c.is_ascii_digit()).unwrap_or(tail.len());
        out.push('0');
        rest = &tail[end..];
    }
    out.push_str(rest);
    out
}

/// Record file with the header's `manifest` removed.
pub fn without_manifest(path: &Path) -> String {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let mut header: serde_json::Value = serde_json::from_str(lines.next().unwrap()).unwrap();
    header.as_object_mut().unwrap().remove("manifest");
    let mut out = serde_json::to_string(&header).unwrap();
    for l in lines {
        out.push('\n');
        out.push_str(l);
    }
    out
}

/// Runs plan, simulate, score and aggregate on the fixture pool into `dir`.
pub fn run_pipeline(dir: &Path) {
    let hidden = dir.join("plans.hidden");
    let responses = dir.join("responses.jsonl");
    let reports = dir.join("reports.jsonl");
    cfprobe_ok(&["plan", "--queries", s(&fixture("pool.jsonl")), "--config", s(&fixture("plan.json")), "--out", s(dir)]);
    cfprobe_ok(&[
        "simulate", "--queries", s(&fixture("pool.jsonl")), "--hidden-map", s(&hidden),
        "--config", s(&fixture("simulate.json")), "--out", s(dir),
    ]);
    cfprobe_ok(&["score", "--hidden-map", s(&hidden), "--responses", s(&responses), "--scale", "1,5", "--out", s(&reports)]);
    cfprobe_ok(&[
        "aggregate", "--hidden-map", s(&hidden), "--responses", s(&responses), "--reports", s(&reports),
        "--policy", s(&fixture("policy_filter.json")), "--scale", "1,5", "--out", s(&dir.join("dataset.jsonl")),
    ]);
    cfprobe_ok(&[
        "evaluate", "--dataset", s(&dir.join("dataset.jsonl")), "--queries", s(&fixture("pool.jsonl")),
        "--out", s(&dir.join("fairness.json")),
    ]);
}
