use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

use tempfile::TempDir;

fn leafpipe(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_leafpipe"))
        .args(args)
        .env("LEAFPIPE_JOBS", "1")
        .output()
        .expect("spawn leafpipe")
}

fn ok(args: &[&str]) -> String {
    let out = leafpipe(args);
    assert!(out.status.success(), "leafpipe {args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// A small synthetic dataset, its config and extracted features, shared by every test.
struct Fixture {
    dir: TempDir,
}

impl Fixture {
    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }
}

fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let f = Fixture { dir: tempfile::tempdir().unwrap() };
        std::fs::write(f.path("small.toml"), "image_size = 32\ndicdm_size = 16\n").unwrap();
        let config = f.path("small.toml");
        ok(&["synth-data", "--per-class", "15", "--size", "32", "--seed", "3", "--out", s(&f.path("synth"))]);
        ok(&["extract", "--config", s(&config), "--data", s(&f.path("synth/images")), "--out", s(&f.path("features.csv"))]);
        f
    })
}

#[test]
fn usage_errors_exit_2() {
    let out = leafpipe(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error: kind=usage"));
    let out = leafpipe(&["select", "--features", "x.csv", "--method", "lasso"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_input_is_a_runtime_error() {
    let out = leafpipe(&["ingest", "--data", "/nonexistent/leafpipe"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error: kind="));
}

#[test]
fn ingest_lists_six_classes() {
    let f = fixture();
    let text = ok(&["ingest", "--data", s(&f.path("synth/images"))]);
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["classes"].as_array().unwrap().len(), 6);
}

#[test]
fn extract_is_reproducible() {
    let f = fixture();
    let again = f.path("features_again.csv");
    ok(&["extract", "--config", s(&f.path("small.toml")), "--data", s(&f.path("synth/images")), "--out", s(&again)]);
    let a = std::fs::read(f.path("features.csv")).unwrap();
    let b = std::fs::read(&again).unwrap();
    assert_eq!(a, b);
    let header = String::from_utf8_lossy(&a).lines().next().unwrap().to_string();
    assert_eq!(header.split(',').count(), 252 + 2);
    assert!(f.path("features.csv.meta.json").exists());
}

#[test]
fn train_rejects_foreign_dictionary() {
    let f = fixture();
    let text = std::fs::read_to_string(f.path("features.csv")).unwrap();
    let renamed = text.replacen("tex.area", "tex.surface", 1);
    let bad = f.path("renamed.csv");
    std::fs::write(&bad, renamed).unwrap();
    let out = leafpipe(&["train", "--features", s(&bad), "--out", s(&f.path("bad_model.json"))]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("kind=dictionary_mismatch"), "{err}");
    assert!(err.contains("tex.area"), "{err}");
}

#[test]
fn train_then_eval() {
    let f = fixture();
    let model = f.path("model.json");
    ok(&["train", "--features", s(&f.path("features.csv")), "--subset", "glcm", "--seed", "1", "--out", s(&model)]);
    let text = ok(&["eval", "--model", s(&model), "--features", s(&f.path("features.csv"))]);
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["samples"], 90);
    assert!(v["metrics"]["accuracy"].as_f64().unwrap() > 50.0);
}

#[test]
fn reduce_and_select_widths() {
    let f = fixture();
    let features = f.path("features.csv");
    ok(&["reduce", "--features", s(&features), "--method", "kpca", "--components", "20", "--out", s(&f.path("kpca.csv"))]);
    let header = std::fs::read_to_string(f.path("kpca.csv")).unwrap();
    assert_eq!(header.lines().next().unwrap().split(',').count(), 20 + 2);
    ok(&["select", "--features", s(&features), "--method", "anova", "--out", s(&f.path("anova.csv"))]);
    let header = std::fs::read_to_string(f.path("anova.csv")).unwrap();
    assert_eq!(header.lines().next().unwrap().split(',').count(), 50 + 2);
}

#[test]
fn kpca_row_and_report_round_trip() {
    let f = fixture();
    let out = f.path("kpca_run");
    ok(&[
        "run-experiment",
        "--features",
        s(&f.path("features.csv")),
        "--rows",
        "KPCA",
        "--folds",
        "10",
        "--seed",
        "7",
        "--out",
        s(&out),
    ]);
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    let rows = report["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0]["n_features"], 65);
    assert!(rows[0]["error"].is_null());
    assert!(out.join("audit.json").exists());

    let table = ok(&["report", "--input", s(&out.join("report.json"))]);
    assert_eq!(table, std::fs::read_to_string(out.join("table.txt")).unwrap());
    let csv = ok(&["report", "--input", s(&out.join("report.json")), "--csv"]);
    assert_eq!(csv, std::fs::read_to_string(out.join("table.csv")).unwrap());
}

#[test]
fn shipped_config_matches_defaults() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../leafpipe.toml");
    let cfg = leafpipe::pipeline::PipelineConfig::load(&path).unwrap();
    assert_eq!(cfg, leafpipe::pipeline::PipelineConfig::default());
}
