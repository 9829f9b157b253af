use std::net::TcpListener;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn forge(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_forge"))
        .args(args)
        .current_dir(dir)
        .env("FORGE_LOG", "off")
        .output()
        .expect("spawn forge")
}

fn ok(dir: &Path, args: &[&str]) -> Value {
    let out = forge(dir, args);
    assert!(
        out.status.success(),
        "forge {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).unwrap()
}

fn envelope(out: &Output) -> Value {
    serde_json::from_slice(&out.stderr)
        .unwrap_or_else(|_| panic!("stderr: {}", String::from_utf8_lossy(&out.stderr)))
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn fixture(dir: &Path, n: &str) {
    ok(
        dir,
        &["synth", "--n", n, "--seed", "3", "--out", "base.jsonl"],
    );
    ok(
        dir,
        &[
            "generate",
            "--base",
            "base.jsonl",
            "--strategy",
            "debiased",
            "--seed",
            "3",
            "--out",
            "ds.jsonl",
        ],
    );
}

#[test]
fn validate_reports_and_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    fixture(dir, "200");
    let v = ok(dir, &["validate", "--dataset", "ds.jsonl"]);
    assert_eq!(v["valid"], true);
    assert!(dir.join("ds.jsonl.validation.json").exists());

    // Point one instance's answer at a distractor.
    let text = std::fs::read_to_string(dir.join("ds.jsonl")).unwrap();
    let mut lines: Vec<Value> = text
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    let c = lines[0]["correct_index"].as_u64().unwrap();
    lines[0]["correct_index"] = ((c + 1) % 4).into();
    let broken: String = lines.iter().map(|l| format!("{l}\n")).collect();
    std::fs::write(dir.join("bad.jsonl"), broken).unwrap();
    let out = forge(
        dir,
        &[
            "validate",
            "--dataset",
            "bad.jsonl",
            "--report",
            "bad.report.json",
        ],
    );
    assert_eq!(out.status.code(), Some(1));
    let env = envelope(&out);
    assert_eq!(env["error"]["kind"], "validation");
    assert_eq!(env["error"]["report"], "bad.report.json");
    let report = read_json(&dir.join("bad.report.json"));
    assert!(report["violations"]
        .as_array()
        .unwrap()
        .iter()
        .any(|v| v["rule"] == "correct_index"));
}

#[test]
fn usage_errors_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(
        forge(tmp.path(), &["audit", "--bogus"]).status.code(),
        Some(2)
    );
    // Randomized subcommands require an explicit seed.
    let out = forge(
        tmp.path(),
        &["generate", "--base", "b", "--strategy", "llm", "--out", "o"],
    );
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(forge(tmp.path(), &["frobnicate"]).status.code(), Some(2));
}

#[test]
fn missing_input_is_machine_readable() {
    let tmp = tempfile::tempdir().unwrap();
    let out = forge(
        tmp.path(),
        &[
            "audit",
            "--dataset",
            "missing.jsonl",
            "--backend",
            "oracle",
            "--seed",
            "1",
            "--report",
            "r.json",
        ],
    );
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(envelope(&out)["error"]["kind"], "io");
}

#[test]
fn unreachable_endpoint_writes_partial_report() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    fixture(dir, "30");
    let port = TcpListener::bind("127.0.0.1:0")
        .unwrap()
        .local_addr()
        .unwrap()
        .port();
    // Discovered beside the dataset.
    std::fs::write(
        dir.join("forge.toml"),
        format!("[endpoint]\nbase_url = \"http://127.0.0.1:{port}/v1\"\nmodel = \"ghost\"\nretries = 0\nbackoff_ms = 1\n"),
    )
    .unwrap();
    let out = forge(
        dir,
        &[
            "audit",
            "--dataset",
            "ds.jsonl",
            "--backend",
            "http",
            "--seed",
            "1",
            "--report",
            "audit.json",
        ],
    );
    assert_eq!(out.status.code(), Some(1));
    let env = envelope(&out);
    assert_eq!(env["error"]["kind"], "audit_aborted");
    assert_eq!(env["error"]["report"], "audit.json");
    let report = read_json(&dir.join("audit.json"));
    assert_eq!(report["status"], "aborted");
    assert_eq!(report["backend_id"], "http:ghost");
    let failures = report["failures"].as_array().unwrap();
    assert!(!failures.is_empty());
    assert!(failures[0]["cause"].as_str().unwrap().contains("transport"));
    assert!(dir.join("audit.json.records.jsonl").exists());
}

#[test]
fn schedule_writes_manifest_and_sidecars() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    fixture(dir, "100");
    ok(
        dir,
        &[
            "schedule",
            "--dataset",
            "ds.jsonl",
            "--steps",
            "20",
            "--batch",
            "16",
            "--seed",
            "4",
            "--out",
            "m.jsonl",
        ],
    );
    let text = std::fs::read_to_string(dir.join("m.jsonl")).unwrap();
    let lines: Vec<Value> = text
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 20);
    assert_eq!(lines[0]["step"], 0);
    assert_eq!(lines[0]["drop_fraction"], 100.0);
    assert_eq!(lines[0]["items"].as_array().unwrap().len(), 16);
    let meta = read_json(&dir.join("m.jsonl.meta.json"));
    assert_eq!(meta["config"]["tau"], 670);
    assert_eq!(meta["config"]["formula"], "interpolated");
    assert_eq!(meta["training"]["learning_rate"], 2e-5);
    let open = std::fs::read_to_string(dir.join("m.jsonl.openended.jsonl")).unwrap();
    assert_eq!(open.lines().count(), 100);
    assert!(!open.contains("options"));
}

#[test]
fn styled_then_debiased_pipeline_reduces_bias() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    ok(
        dir,
        &["synth", "--n", "600", "--seed", "5", "--out", "base.jsonl"],
    );
    ok(
        dir,
        &[
            "generate",
            "--base",
            "base.jsonl",
            "--strategy",
            "llm",
            "--expert",
            "styled",
            "--seed",
            "5",
            "--out",
            "llm.jsonl",
        ],
    );
    ok(
        dir,
        &[
            "generate",
            "--base",
            "base.jsonl",
            "--strategy",
            "debiased",
            "--expert",
            "styled",
            "--seed",
            "5",
            "--from-stage1",
            "llm.jsonl.stage1.jsonl",
            "--out",
            "deb.jsonl",
        ],
    );
    for name in ["llm", "deb"] {
        ok(
            dir,
            &[
                "audit",
                "--dataset",
                &format!("{name}.jsonl"),
                "--backend",
                "marker:notably",
                "--blind",
                "--seed",
                "2",
                "--report",
                &format!("{name}.audit.json"),
            ],
        );
    }
    let diff = ok(
        dir,
        &[
            "diff",
            "--a",
            "llm.audit.json",
            "--b",
            "deb.audit.json",
            "--out",
            "diff.json",
        ],
    );
    assert_eq!(diff["verdict"], "bias reduced");
    assert_eq!(diff["basis"], "blind_D_V");
    assert_eq!(read_json(&dir.join("diff.json")), diff);

    let same = ok(
        dir,
        &["diff", "--a", "deb.audit.json", "--b", "deb.audit.json"],
    );
    assert!(same["deltas"]
        .as_object()
        .unwrap()
        .values()
        .all(|d| d == 0.0));

    ok(
        dir,
        &[
            "audit",
            "--dataset",
            "deb.jsonl",
            "--backend",
            "oracle",
            "--seed",
            "2",
            "--report",
            "o.json",
        ],
    );
    let out = forge(dir, &["diff", "--a", "deb.audit.json", "--b", "o.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(envelope(&out)["error"]["kind"], "precondition");
}
