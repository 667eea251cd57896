mod support;

use std::fs;

use support::*;

fn stderr(out: &std::process::Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn pipeline_outputs_have_expected_kinds() {
    let dir = tempfile::tempdir().unwrap();
    run_pipeline(dir.path());
    for (file, kind) in [
        ("plans.hidden", "hidden_plans"),
        ("responses.jsonl", "responses"),
        ("surveys.jsonl", "surveys"),
        ("reports.jsonl", "reports"),
        ("dataset.jsonl", "dataset"),
        ("w0001.plan", "task"),
    ] {
        let text = fs::read_to_string(dir.path().join(file)).unwrap();
        let header: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
        assert_eq!(header["format_version"], 1, "{file}");
        assert_eq!(header["kind"], kind, "{file}");
    }
    let task: serde_json::Value =
        serde_json::from_str(fs::read_to_string(dir.path().join("w0001.plan")).unwrap().lines().next().unwrap()).unwrap();
    assert!(task.get("manifest").is_none());
    assert_eq!(task["run"].as_str().unwrap().len(), 16);
    let fairness: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("fairness.json")).unwrap()).unwrap();
    assert!(fairness["summary"]["parity_gap"].is_number());
}

#[test]
fn worker_visible_files_reveal_nothing() {
    let dir = tempfile::tempdir().unwrap();
    run_pipeline(dir.path());
    for entry in fs::read_dir(dir.path()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "plan") {
            let text = fs::read_to_string(&path).unwrap().to_lowercase();
            for t in WORKER_VISIBLE_FORBIDDEN {
                assert!(!text.contains(t), "{} contains `{t}`", path.display());
            }
        }
    }
}

#[test]
fn seed_flag_overrides_config() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let pool = fixture("pool.jsonl");
    let config = fixture("plan.json");
    cfprobe_ok(&["plan", "--queries", s(&pool), "--config", s(&config), "--out", s(a.path())]);
    cfprobe_ok(&["plan", "--queries", s(&pool), "--config", s(&config), "--seed", "12", "--out", s(b.path())]);
    assert_ne!(
        fs::read_to_string(a.path().join("w0001.plan")).unwrap(),
        fs::read_to_string(b.path().join("w0001.plan")).unwrap()
    );
}

#[test]
fn infeasible_plan_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("plan.json");
    fs::write(&config, r#"{"seed": 1, "worker_count": 2, "plan": {"total_items": 10, "probe_pairs": 5, "min_separation": 6}}"#).unwrap();
    let out = cfprobe(&["plan", "--queries", s(&fixture("pool.jsonl")), "--config", s(&config), "--out", s(dir.path())]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("n <= x - d"), "{}", stderr(&out));
    assert!(!dir.path().join("plans.hidden").exists());
}

#[test]
fn missing_seed_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("plan.json");
    fs::write(&config, r#"{"worker_count": 2, "plan": {"total_items": 12, "probe_pairs": 2}}"#).unwrap();
    let out = cfprobe(&["plan", "--queries", s(&fixture("pool.jsonl")), "--config", s(&config), "--out", s(dir.path())]);
    assert!(!out.status.success());
    assert!(stderr(&out).starts_with("error: no seed"), "{}", stderr(&out));
}

#[test]
fn invalid_queries_are_reported_by_line() {
    let dir = tempfile::tempdir().unwrap();
    let pool = fs::read_to_string(fixture("pool.jsonl")).unwrap();
    let mut lines: Vec<String> = pool.lines().map(String::from).collect();
    let mut q: serde_json::Value = serde_json::from_str(&lines[3]).unwrap();
    q["features"]["Race"] = "Z".into();
    lines[3] = q.to_string();
    let mut q: serde_json::Value = serde_json::from_str(&lines[5]).unwrap();
    let age = q["features"].as_object_mut().unwrap().remove("Age").unwrap();
    q["features"]["Shoe"] = age;
    lines[5] = q.to_string();
    let bad = dir.path().join("pool.jsonl");
    fs::write(&bad, lines.join("\n")).unwrap();
    let out = cfprobe(&["plan", "--queries", s(&bad), "--config", s(&fixture("plan.json")), "--out", s(dir.path())]);
    assert!(!out.status.success());
    let err = stderr(&out);
    assert!(err.contains("pool.jsonl:4:") && err.contains("categorical value not in set"), "{err}");
    assert!(err.contains("pool.jsonl:6:"), "{err}");
}

#[test]
fn off_scale_label_names_the_line() {
    let dir = tempfile::tempdir().unwrap();
    run_pipeline(dir.path());
    let responses = dir.path().join("responses.jsonl");
    let text = fs::read_to_string(&responses).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let mut r: serde_json::Value = serde_json::from_str(&lines[2]).unwrap();
    r["label"] = 9.into();
    lines[2] = r.to_string();
    fs::write(&responses, lines.join("\n")).unwrap();
    let out = cfprobe(&[
        "score", "--hidden-map", s(&dir.path().join("plans.hidden")), "--responses", s(&responses),
        "--scale", "1,5", "--out", s(&dir.path().join("r.jsonl")),
    ]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("responses.jsonl:3: label 9 outside scale [1, 5]"), "{}", stderr(&out));
}

#[test]
fn evaluate_names_queries_without_sensitive_value() {
    let dir = tempfile::tempdir().unwrap();
    run_pipeline(dir.path());
    let pool = fs::read_to_string(fixture("pool.jsonl")).unwrap();
    // drop the sensitive attribute from one labeled query
    let dataset = fs::read_to_string(dir.path().join("dataset.jsonl")).unwrap();
    let first: serde_json::Value = serde_json::from_str(dataset.lines().nth(1).unwrap()).unwrap();
    let target = first["query_id"].as_str().unwrap().to_string();
    let edited: Vec<String> = pool
        .lines()
        .map(|l| {
            let mut v: serde_json::Value = serde_json::from_str(l).unwrap();
            if v["query_id"] == target.as_str() {
                v["features"].as_object_mut().unwrap().remove("Race");
            }
            v.to_string()
        })
        .collect();
    let bad = dir.path().join("pool.jsonl");
    fs::write(&bad, edited.join("\n")).unwrap();
    let out = cfprobe(&[
        "evaluate", "--dataset", s(&dir.path().join("dataset.jsonl")), "--queries", s(&bad),
        "--out", s(&dir.path().join("f.json")),
    ]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains(&target), "{}", stderr(&out));
}

#[test]
fn no_reports_equals_keep_all_filter() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    run_pipeline(d);
    let common = |out: &str| {
        vec![
            "aggregate".to_string(), "--hidden-map".into(), s(&d.join("plans.hidden")).into(),
            "--responses".into(), s(&d.join("responses.jsonl")).into(), "--policy".into(),
            s(&fixture("policy_keep_all.json")).into(), "--scale".into(), "1,5".into(), "--out".into(),
            s(&d.join(out)).into(),
        ]
    };
    let a = common("a.jsonl");
    cfprobe_ok(&a.iter().map(String::as_str).collect::<Vec<_>>());
    let mut b = common("b.jsonl");
    b.extend(["--reports".to_string(), s(&d.join("reports.jsonl")).into()]);
    cfprobe_ok(&b.iter().map(String::as_str).collect::<Vec<_>>());
    assert_eq!(without_manifest(&d.join("a.jsonl")), without_manifest(&d.join("b.jsonl")));
}

#[test]
fn experiment_writes_all_outputs() {
    let dir = tempfile::tempdir().unwrap();
    cfprobe_ok(&["experiment", "--config", s(&fixture("experiment.json")), "--out", s(dir.path())]);
    for f in ["report.json", "workers.csv", "scatter.csv", "manifest.json"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let csv = fs::read_to_string(dir.path().join("workers.csv")).unwrap();
    assert_eq!(csv.lines().count(), 21);
    assert!(csv.starts_with("worker_id,kind,"));
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["outputs"].as_object().unwrap().len(), 3);
}

#[test]
fn upstream_timestamp_does_not_leak_downstream() {
    let dir = tempfile::tempdir().unwrap();
    run_pipeline(dir.path());
    let score = |out: &str| {
        let out = dir.path().join(out);
        cfprobe_ok(&[
            "score", "--hidden-map", s(&dir.path().join("plans.hidden")),
            "--responses", s(&dir.path().join("responses.jsonl")), "--scale", "1,5", "--out", s(&out),
        ]);
        without_timestamps(&out)
    };
    let before = score("a.jsonl");
    let responses = dir.path().join("responses.jsonl");
    let text = fs::read_to_string(&responses).unwrap();
    let (head, body) = text.split_once('\n').unwrap();
    let mut header: serde_json::Value = serde_json::from_str(head).unwrap();
    header["manifest"]["timestamp"] = 1.into();
    fs::write(&responses, format!("{header}\n{body}")).unwrap();
    assert_eq!(score("b.jsonl"), before);
}
