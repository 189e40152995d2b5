use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

fn valkit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_valkit"))
        .args(args)
        .current_dir(root())
        .output()
        .expect("binary runs")
}

fn golden(name: &str) -> String {
    std::fs::read_to_string(root().join("tests/golden").join(name)).expect("golden file")
}

fn write_temp(name: &str, text: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR"));
    let path = dir.join(name);
    std::fs::write(&path, text).expect("temp file");
    path
}

#[test]
fn ramified_example_matches_golden() {
    let out = valkit(&["run", "tasks/examples/ramified.json"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(String::from_utf8(out.stdout).unwrap(), golden("ramified.jsonl"));
}

#[test]
fn not_separated_example_matches_golden() {
    let out = valkit(&["run", "tasks/examples/not_separated.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(String::from_utf8(out.stdout).unwrap(), golden("not_separated.jsonl"));
    let text = valkit(&["--format", "text", "run", "tasks/examples/not_separated.json"]);
    assert_eq!(text.status.code(), Some(1));
    assert_eq!(String::from_utf8(text.stdout).unwrap(), golden("not_separated.txt"));
}

#[test]
fn malformed_file_reports_position() {
    let path = write_temp("truncated.json", "{\"universe\": {\"axes\": [\"t\"]}, \"tasks\": [\n");
    let out = valkit(&["run", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(64));
    let line: serde_json::Value = serde_json::from_slice(&out.stdout).expect("json error line");
    assert_eq!(line["error"], "parse");
    assert_eq!(line["line"], 2);
}

#[test]
fn unknown_fields_and_commands_are_usage_errors() {
    let path = write_temp(
        "unknown.json",
        r#"{"universe": {"axes": ["t"]}, "tasks": [], "extra": 1}"#,
    );
    assert_eq!(valkit(&["run", path.to_str().unwrap()]).status.code(), Some(64));
    assert_eq!(valkit(&["frobnicate"]).status.code(), Some(64));
    assert_eq!(valkit(&["run", "does/not/exist.json"]).status.code(), Some(64));
}

#[test]
fn subcommand_filters_by_kind() {
    let out = valkit(&["rv", "indep", "tasks/suite/refinement.json"]);
    assert_eq!(out.status.code(), Some(0));
    let lines: Vec<serde_json::Value> = String::from_utf8(out.stdout)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    let tasks = &lines[..lines.len() - 1];
    assert_eq!(tasks.len(), 4);
    assert!(tasks.iter().all(|t| t["kind"] == "rv-indep"));
}

#[test]
fn seeded_runs_are_reproducible() {
    let a = valkit(&["run", "tasks/suite/morphisms.json"]);
    let b = valkit(&["run", "tasks/suite/morphisms.json"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let c = valkit(&["--seed", "5", "run", "tasks/suite/morphisms.json"]);
    assert_eq!(c.status.code(), Some(0));
}

#[test]
fn hypothesis_violations_exit_with_two() {
    let path = write_temp(
        "torsion.json",
        r#"{
  "universe": {"axes": ["t"], "residue_variables": ["x1"]},
  "presentations": [
    {"name": "Qt", "generators": ["t"]},
    {"name": "L", "base": "Qt", "generators": ["t^(1/2)"]},
    {"name": "M", "base": "Qt", "generators": ["x1"]}
  ],
  "tasks": [{"kind": "comp-verify", "L": "L", "M": "M", "C": "Qt", "degree": 2}]
}"#,
    );
    let out = valkit(&["run", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}
