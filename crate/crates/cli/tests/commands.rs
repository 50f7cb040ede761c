use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cisurvey_cli::manifest::RunManifest;

fn cisurvey(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cisurvey"))
        .args(args)
        .env("SOURCE_DATE_EPOCH", "1700000000")
        .output()
        .unwrap()
}

fn shipped_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/data/smart_home.json")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const MINIMAL: &str = r#"{
  "senders": ["a kettle"],
  "recipients": ["its manufacturer"],
  "attributes": ["{subject}'s tea habits"],
  "transmission_principles": [{"text": "null", "null": true}]
}"#;

#[test]
fn minimal_config_gives_one_definition() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("min.json");
    fs::write(&config, MINIMAL).unwrap();
    let out = dir.path().join("defs");
    let o = cisurvey(&["generate", "--config", s(&config), "--seed", "1", "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(fs::read_dir(out.join("surveys")).unwrap().count(), 1);
    let flows = fs::read_to_string(out.join("flows.csv")).unwrap();
    assert_eq!(flows.lines().count(), 2);
    assert!(flows.contains("A kettle records its owner's tea habits and sends this information to its manufacturer."));

    let manifest: RunManifest = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest.seed, Some(1));
    assert_eq!(manifest.created_at, 1_700_000_000);
    assert_eq!(manifest.outputs.len(), 3);
    for f in &manifest.outputs {
        let bytes = fs::read(out.join(&f.path)).unwrap();
        assert_eq!(cisurvey_cli::manifest::sha256_hex(&bytes), f.sha256);
    }
}

#[test]
fn bad_config_exits_2_without_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.json");
    fs::write(&config, r#"{"senders": [], "recipients": ["x"], "attributes": ["y"], "transmission_principles": []}"#).unwrap();
    let out = dir.path().join("defs");
    let o = cisurvey(&["generate", "--config", s(&config), "--seed", "1", "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1, "no scratch directories left behind");

    fs::write(&config, "{\n  \"senders\": [\"a\"],\n  \"colour\": 1\n}").unwrap();
    let o = cisurvey(&["generate", "--config", s(&config), "--seed", "1", "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("colour") && err.contains("line 3"), "{err}");
}

#[test]
fn seed_is_mandatory() {
    let dir = tempfile::tempdir().unwrap();
    let o = cisurvey(&["generate", "--config", s(&shipped_config()), "--out", s(&dir.path().join("d"))]);
    assert!(!o.status.success());
}

#[test]
fn existing_output_needs_force() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("defs");
    let config = shipped_config();
    let args = ["generate", "--config", s(&config), "--seed", "1", "--out", s(&out)];
    assert!(cisurvey(&args).status.success());
    assert_eq!(cisurvey(&args).status.code(), Some(4));
    let mut forced = args.to_vec();
    forced.push("--force");
    assert!(cisurvey(&forced).status.success());
}

#[test]
fn variants_multiply_definitions() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("defs");
    let o = cisurvey(&["generate", "--config", s(&shipped_config()), "--seed", "10", "--variants", "2", "--out", s(&out)]);
    assert!(o.status.success());
    let names: Vec<String> = fs::read_dir(out.join("surveys"))
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    assert_eq!(names.len(), 96);
    assert!(names.contains(&"set-01-s10.json".to_string()) && names.contains(&"set-01-s11.json".to_string()));
}

#[test]
fn simulate_and_analyze() {
    let dir = tempfile::tempdir().unwrap();
    let defs = dir.path().join("defs");
    assert!(cisurvey(&["generate", "--config", s(&shipped_config()), "--seed", "3", "--out", s(&defs)]).status.success());
    let model = dir.path().join("model.json");
    fs::write(&model, r#"{"respondent_sd": 0.4, "answer_sd": 0.6, "inattentive_probability": 0.1}"#).unwrap();

    // n = 0: header only.
    let empty = dir.path().join("empty.csv");
    let o = cisurvey(&["simulate", "--model", s(&model), "--definitions", s(&defs), "--n", "0", "--seed", "1", "--out", s(&empty)]);
    assert!(o.status.success());
    assert_eq!(fs::read_to_string(&empty).unwrap().lines().count(), 1);

    // Empty retained dataset is a data error.
    let report = dir.path().join("report");
    let o = cisurvey(&["analyze", "--responses", s(&empty), "--definitions", s(&defs), "--out", s(&report)]);
    assert_eq!(o.status.code(), Some(3));
    assert!(!report.exists());

    let resp = dir.path().join("resp.csv");
    let o = cisurvey(&["simulate", "--model", s(&model), "--definitions", s(&defs), "--n", "2000", "--seed", "9", "--out", s(&resp)]);
    assert!(o.status.success());
    let text = fs::read_to_string(&resp).unwrap();
    let respondents: std::collections::BTreeSet<&str> =
        text.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(respondents.len(), 2000);

    let o = cisurvey(&["analyze", "--responses", s(&resp), "--definitions", s(&defs), "--out", s(&report)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for name in cisurvey_core::analysis::REPORT_FILES {
        assert!(report.join(name).is_file(), "{name}");
    }

    // A model naming an unknown value is a configuration error.
    fs::write(&model, r#"{"effects": {"recipient": {"a stranger": 1.0}}}"#).unwrap();
    let o = cisurvey(&["simulate", "--model", s(&model), "--definitions", s(&defs), "--n", "5", "--seed", "1", "--out", s(&resp)]);
    assert_eq!(o.status.code(), Some(2));

    let o = cisurvey(&["analyze", "--responses", s(&resp), "--definitions", s(&defs), "--alpha", "1.5", "--out", s(&dir.path().join("r2"))]);
    assert_eq!(o.status.code(), Some(2));
    let o = cisurvey(&["analyze", "--responses", s(&dir.path().join("missing.csv")), "--definitions", s(&defs), "--out", s(&dir.path().join("r3"))]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn port_in_use_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let defs = dir.path().join("defs");
    assert!(cisurvey(&["generate", "--config", s(&shipped_config()), "--seed", "3", "--out", s(&defs)]).status.success());
    let held = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = held.local_addr().unwrap().to_string();
    let o = cisurvey(&["serve", "--definitions", s(&defs), "--bind", &addr, "--log", s(&dir.path().join("log.csv"))]);
    assert_eq!(o.status.code(), Some(4));
}
