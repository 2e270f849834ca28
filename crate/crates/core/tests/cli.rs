mod common;

use std::path::Path;
use std::process::{Command, Output};

fn ndr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ndr"))
        .args(args)
        .env_remove("NDR_SEED")
        .output()
        .unwrap()
}

fn wine() -> String {
    common::data_dir().join("wine.csv").display().to_string()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn no_arguments_prints_usage() {
    let o = ndr(&[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let o = ndr(&["reduce", "--method", "pca", "--bogus"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn missing_input_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = ndr(&["ega", "--input", "no/such.csv", "--output", s(&dir.path().join("o.csv"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"));
}

#[test]
fn degenerate_data_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("tiny.csv");
    std::fs::write(&input, "a,b\n1,2\n3,5\n").unwrap();
    let o = ndr(&["reduce", "--method", "pca", "--input", s(&input), "--output", s(&dir.path().join("o.csv"))]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn reduce_none_passes_features_through() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("none.csv");
    let o = ndr(&["reduce", "--method", "none", "--input", &wine(), "--output", s(&out), "--target", "class"]);
    assert_eq!(o.status.code(), Some(0));
    let (a, at) = ndr::matrix::load_csv(wine(), Some("class")).unwrap();
    let (b, bt) = ndr::matrix::load_csv(&out, Some("class")).unwrap();
    assert_eq!(a.column_names(), b.column_names());
    assert!((a.values() - b.values()).abs().max() < 1e-12);
    assert_eq!(at, bt);
}

#[test]
fn ega_writes_scores_and_membership() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("scores.csv");
    let o = ndr(&["ega", "--input", &wine(), "--output", s(&out), "--target", "class"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let side: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("scores.membership.json")).unwrap()).unwrap();
    let membership = side["membership"].as_object().unwrap();
    assert_eq!(membership.len(), 13);
    let dims = side["dimensions"].as_u64().unwrap() as usize;
    let (scores, target) = ndr::matrix::load_csv(&out, Some("class")).unwrap();
    assert_eq!(scores.p(), dims);
    assert_eq!(scores.n(), 178);
    assert_eq!(target.unwrap().len(), 178);
    assert!(membership.values().all(|c| (1..=dims as u64).contains(&c.as_u64().unwrap())));
}

#[test]
fn uva_map_goes_to_explicit_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let side = dir.path().join("custom.json");
    let o = ndr(&[
        "uva", "--input", &wine(), "--output", s(&dir.path().join("u.csv")),
        "--target", "class", "--sidecar", s(&side), "--threshold", "10",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let map: serde_json::Value = serde_json::from_slice(&std::fs::read(&side).unwrap()).unwrap();
    assert!(map["iterations"].as_array().unwrap().is_empty());
    assert_eq!(map["columns"].as_object().unwrap().len(), 13);
}

#[test]
fn bench_accepts_object_and_array_configs() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::copy(wine(), dir.path().join("wine.csv")).unwrap();
    let one = dir.path().join("one.json");
    std::fs::write(&one, r#"{"dataset": "wine.csv", "target": "class", "method": "pca", "folds": 3}"#).unwrap();
    let o = ndr(&["bench", "--config", s(&one), "--out", s(&dir.path().join("r1.json"))]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert_eq!(stdout.lines().count(), 2);
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("r1.json")).unwrap()).unwrap();
    assert_eq!(report["records"].as_array().unwrap().len(), 3);

    let many = dir.path().join("many.json");
    std::fs::write(
        &many,
        r#"[{"dataset": "wine.csv", "target": "class", "method": "none", "folds": 3},
            {"dataset": "wine.csv", "target": "class", "method": "ega", "folds": 3}]"#,
    )
    .unwrap();
    let o = ndr(&["--format", "json", "bench", "--config", s(&many), "--out", s(&dir.path().join("r2.json"))]);
    assert_eq!(o.status.code(), Some(0));
    let summary: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(summary.as_array().unwrap().len(), 2);

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"dataset": "wine.csv", "target": "class", "colour": 1}"#).unwrap();
    let o = ndr(&["bench", "--config", s(&bad), "--out", s(&dir.path().join("r3.json"))]);
    assert_eq!(o.status.code(), Some(2));
}
