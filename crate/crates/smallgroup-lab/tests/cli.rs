use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use smallgroup_lab::report::PAPER_TAGS;

fn exe() -> &'static str {
    env!("CARGO_BIN_EXE_smallgroup-lab")
}

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(exe()).args(args).env_remove("SMALLGROUP_LAB_THREADS").output().expect("binary runs")
}

fn run_config(name: &str, extra: &[&str]) -> Output {
    let cfg = data(name);
    let mut args = vec!["--config", cfg.to_str().unwrap()];
    args.extend_from_slice(extra);
    run(&args)
}

const SCENARIOS: [&str; 9] = [
    "thin_apriori.json",
    "game_example.json",
    "coords_z4.json",
    "levelsets_z8.json",
    "skeleton_z4.json",
    "demo_product.json",
    "torus_circle.json",
    "pipeline_profinite.json",
    "pipeline_torus.json",
];

fn assert_golden(name: &str) {
    let out = run_config(name, &[]);
    assert_eq!(out.status.code(), Some(0), "{name}: {}", String::from_utf8_lossy(&out.stderr));
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(&path, &out.stdout).unwrap();
    }
    let expected = std::fs::read(&path).unwrap_or_else(|_| panic!("missing golden file {}", path.display()));
    assert!(out.stdout == expected, "{name} differs from its golden file");
}

#[test]
fn golden_thin_apriori() {
    assert_golden("thin_apriori.json");
    let v: Value = serde_json::from_slice(&run_config("thin_apriori.json", &[]).stdout).unwrap();
    assert_eq!(v["results"]["thinning"]["indices"], serde_json::json!([0, 1, 13]));
    assert!(v["checks"].as_array().unwrap().iter().all(|c| c["paper_tag"] == "korl" && c["status"] == "pass"));
}

#[test]
fn golden_game_example() {
    assert_golden("game_example.json");
}

#[test]
fn golden_coords() {
    assert_golden("coords_z4.json");
    let v: Value = serde_json::from_slice(&run_config("coords_z4.json", &[]).stdout).unwrap();
    assert_eq!(v["results"]["coordinates"], serde_json::json!([1, 2, 2]));
    assert_eq!(v["results"]["decoded"], serde_json::json!([0, 0, 2]));
    assert_eq!(v["results"]["measure"], serde_json::json!({"num": "1", "den": "4"}));
}

#[test]
fn golden_levelsets() {
    assert_golden("levelsets_z8.json");
}

#[test]
fn golden_skeleton() {
    assert_golden("skeleton_z4.json");
    let v: Value = serde_json::from_slice(&run_config("skeleton_z4.json", &[]).stdout).unwrap();
    assert_eq!(v["results"]["combined"]["word"], serde_json::json!([1, 2, 1]));
    assert_eq!(v["results"]["combined"]["level"], 2);
}

#[test]
fn golden_torus() {
    assert_golden("torus_circle.json");
    let v: Value = serde_json::from_slice(&run_config("torus_circle.json", &[]).stdout).unwrap();
    assert_eq!(v["results"]["resolutions"], serde_json::json!([0, 1, 7]));
}

#[test]
fn golden_pipelines() {
    assert_golden("demo_product.json");
    assert_golden("pipeline_profinite.json");
    assert_golden("pipeline_torus.json");
}

#[test]
fn reruns_are_byte_identical() {
    for name in SCENARIOS {
        let a = run_config(name, &[]);
        let b = run_config(name, &[]);
        assert_eq!(a.stdout, b.stdout, "{name}");
        let t1 = run_config(name, &["--format", "table"]);
        let t2 = run_config(name, &["--format", "table"]);
        assert_eq!(t1.stdout, t2.stdout, "{name}");
    }
}

#[test]
fn thread_count_does_not_change_reports() {
    let name = "pipeline_profinite.json";
    let cfg = data(name);
    let one = Command::new(exe())
        .args(["--config", cfg.to_str().unwrap()])
        .env("SMALLGROUP_LAB_THREADS", "1")
        .output()
        .unwrap();
    assert_eq!(one.stdout, run_config(name, &[]).stdout);
}

#[test]
fn seed_flag_is_recorded_and_used() {
    let a: Value = serde_json::from_slice(&run_config("pipeline_torus.json", &["--seed", "5"]).stdout).unwrap();
    let b: Value = serde_json::from_slice(&run_config("pipeline_torus.json", &["--seed", "6"]).stdout).unwrap();
    assert_eq!(a["rng"]["seed"], 5);
    assert_eq!(a["scenario"]["seed"], 5);
    assert_eq!(a["rng"]["algorithm"], "ChaCha8Rng");
    assert_ne!(a["results"]["solution"], b["results"]["solution"]);
}

#[test]
fn reports_match_schema() {
    let schema: Value = serde_json::from_slice(&run(&["schema"]).stdout).unwrap();
    let compiled = jsonschema::JSONSchema::compile(&schema).expect("schema compiles");
    for name in SCENARIOS.iter().chain(&["thin_exhausted.json"]) {
        let report: Value = serde_json::from_slice(&run_config(name, &[]).stdout).unwrap();
        if let Err(errors) = compiled.validate(&report) {
            let msgs: Vec<String> = errors.map(|e| format!("{} at {}", e, e.instance_path)).collect();
            panic!("{name}: {msgs:?}");
        }
        for c in report["checks"].as_array().unwrap() {
            assert!(PAPER_TAGS.contains(&c["paper_tag"].as_str().unwrap()));
        }
    }
    let mut broken: Value = serde_json::from_slice(&run_config("game_example.json", &[]).stdout).unwrap();
    broken["checks"][0]["paper_tag"] = "unknown".into();
    assert!(!compiled.is_valid(&broken));
}

#[test]
fn exit_codes() {
    let bad = run_config("malformed.json", &[]);
    assert_eq!(bad.status.code(), Some(2));
    let err = String::from_utf8_lossy(&bad.stderr);
    assert!(err.contains("line 4") && err.contains("column"), "{err}");

    let exhausted = run_config("thin_exhausted.json", &[]);
    assert_eq!(exhausted.status.code(), Some(1));
    let v: Value = serde_json::from_slice(&exhausted.stdout).unwrap();
    assert_eq!(v["error"]["kind"], "GeneratorExhausted");

    let dense = data("not_dense.json");
    let fail = run(&["game", "--space", "2,2", "--dense", dense.to_str().unwrap()]);
    assert_eq!(fail.status.code(), Some(1));

    let member = run(&["skeleton", "--tower", "cyclic:2:0,1,2", "--check", "1,2,2:1:1,2"]);
    assert_eq!(member.status.code(), Some(1));

    assert_eq!(run(&["thin", "--generator", "cyclic:2"]).status.code(), Some(2));
    assert_eq!(run(&["thin", "--generator", "bogus:2", "--depth", "1"]).status.code(), Some(2));
    assert_eq!(run(&["no-such-verb"]).status.code(), Some(2));
    let cfg = data("thin_apriori.json");
    assert_eq!(run(&["--config", cfg.to_str().unwrap(), "torus"]).status.code(), Some(2));
    let threads = Command::new(exe()).args(["schema"]).env("SMALLGROUP_LAB_THREADS", "zero").output().unwrap();
    assert_eq!(threads.status.code(), Some(2));
}

#[test]
fn out_flag_writes_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("report.json");
    let out = run_config("game_example.json", &["--out", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    assert_eq!(std::fs::read(&path).unwrap(), run_config("game_example.json", &[]).stdout);
}

#[test]
fn verbs_match_configs() {
    let from_flags = run(&["thin", "--generator", "cyclic:2", "--depth", "2", "--mode", "apriori"]);
    assert_eq!(from_flags.stdout, run_config("thin_apriori.json", &[]).stdout);
    let dense = data("game_example.json");
    let v: Value = serde_json::from_slice(&std::fs::read(dense).unwrap()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let sets = dir.path().join("sets.json");
    std::fs::write(&sets, v["dense"].to_string()).unwrap();
    let game = run(&["game", "--space", "2,2", "--dense", sets.to_str().unwrap()]);
    assert_eq!(game.stdout, run_config("game_example.json", &[]).stdout);
}
