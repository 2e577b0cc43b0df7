use std::process::{Command, Output};

use poisson_approx::families::{generate, FamilyKind};
use poisson_approx::ModelFile;
use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_poisson-approx"))
        .args(args)
        .output()
        .unwrap()
}

fn model_file(dir: &tempfile::TempDir) -> String {
    let path = dir.path().join("model.json");
    let model = generate(FamilyKind::General, 1, 2);
    std::fs::write(&path, ModelFile::from_model(&model).to_json()).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&["--version"]).status.code(), Some(0));
}

#[test]
fn bad_arguments_exit_one() {
    assert_eq!(run(&["compute"]).status.code(), Some(1));
    assert_eq!(run(&["verify", "--theorem", "t9"]).status.code(), Some(1));
    let out = run(&["compute", "--model", "/nonexistent/model.json", "--theorem", "t0"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--model"));
}

#[test]
fn square_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let model = model_file(&dir);
    let out = run(&["compute", "--model", &model, "--theorem", "t4", "--g", "square", "--kappa", "2"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stderr.is_empty());
}

#[test]
fn invalid_model_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(
        &path,
        r#"{"step": 1.0, "components": [{"p": 1.5, "U": {"atoms": [[0, 1]]}, "V": {"atoms": [[1, 1]]}}]}"#,
    )
    .unwrap();
    let out = run(&["compute", "--model", path.to_str().unwrap(), "--theorem", "t0"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("components[0]"));
}

#[test]
fn compute_reports_terms_and_total() {
    let dir = tempfile::tempdir().unwrap();
    let model = model_file(&dir);
    let out = run(&["compute", "--model", &model, "--theorem", "t2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let terms: f64 = v["terms"].as_object().unwrap().values().map(|t| t.as_f64().unwrap()).sum();
    assert!((terms - v["total_with_c1"].as_f64().unwrap()).abs() < 1e-12);
}

#[test]
fn verify_writes_csv_table() {
    let out = run(&["verify", "--theorem", "t0", "--families", "5"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap();
    assert!(header.starts_with("id,family,theorem"));
    assert!(header.contains("family_max_ratio"));
    assert_eq!(lines.count(), 5);
}

#[test]
fn simulate_reports_sandwich_and_counts() {
    let out = run(&["simulate", "--dim", "2", "--lambda", "1"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["dim"], 2);
    assert!(v["sandwich"]["passed"].is_boolean());
    assert!(v["counts"]["mean"].is_number());
}
