use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fairmip::cli::config::DataConfig;
use fairmip::cli::evaluation_document;
use fairmip::dataset::load_csv;
use fairmip::forest::{evaluate, load};
use fairmip::mip::read_lp;

fn bundled_csv() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data/synthetic.csv")
}

fn fairmip(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fairmip")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Small budget so the end-to-end commands finish in a few seconds.
fn write_small_config(dir: &Path) -> PathBuf {
    let path = dir.join("config.json");
    let cfg = r#"{
        "seed": 3,
        "train": {"n_tree": 3, "depth": 2, "batch_size": 60, "t_limit": 5.0, "max_nodes": 20000},
        "sweep": {"repetitions": 2, "test_fraction": 0.3},
        "theory": {"monte_carlo_samples": 20000, "random_joints": 50}
    }"#;
    std::fs::write(&path, cfg).unwrap();
    path
}

#[test]
fn zero_probability_injection_leaves_the_file_unchanged() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.json");
    std::fs::write(&spec, r#"{"entries": [{"feature": "score", "p0": 0.0, "p1": 0.0}]}"#).unwrap();
    let out = dir.path().join("same.csv");
    let o = fairmip(&["inject", "--input", p(&bundled_csv()), "--spec", p(&spec), "--output", p(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(std::fs::read(&out).unwrap(), std::fs::read(bundled_csv()).unwrap());
}

#[test]
fn injection_of_an_absent_feature_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.json");
    std::fs::write(&spec, r#"{"entries": [{"feature": "no_such_column", "p0": 0.1, "p1": 0.1}]}"#).unwrap();
    let o = fairmip(&["inject", "--input", p(&bundled_csv()), "--spec", p(&spec), "--out", p(dir.path())]);
    assert_eq!(code(&o), 2);
}

#[test]
fn unknown_config_key_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"train": {"n_trees": 3}}"#).unwrap();
    let o = fairmip(&["--config", p(&cfg), "train", "--data", p(&bundled_csv())]);
    assert_eq!(code(&o), 1);
    assert_eq!(code(&fairmip(&["train"])), 1);
}

#[test]
fn train_predict_evaluate_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_small_config(dir.path());
    let before = std::fs::read(bundled_csv()).unwrap();
    let out = p(dir.path());

    let o = fairmip(&["--config", p(&cfg), "--out", out, "-q", "train", "--data", p(&bundled_csv())]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let model_path = dir.path().join("model.json");
    assert!(dir.path().join("train_log.json").exists());

    let o = fairmip(&["--out", out, "predict", "--model", p(&model_path), "--data", p(&bundled_csv())]);
    assert_eq!(code(&o), 0);
    let preds = std::fs::read_to_string(dir.path().join("predictions.csv")).unwrap();
    let n_rows = before.iter().filter(|&&b| b == b'\n').count() - 1;
    assert_eq!(preds.lines().next(), Some("row,prediction"));
    assert_eq!(preds.lines().count() - 1, n_rows);

    let o = fairmip(&["--out", out, "evaluate", "--model", p(&model_path), "--data", p(&bundled_csv())]);
    assert_eq!(code(&o), 0);
    let written: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("evaluation.json")).unwrap()).unwrap();
    let m = load(&model_path).unwrap();
    let data_cfg = DataConfig::default();
    let ds = load_csv(bundled_csv(), &data_cfg.csv_options()).unwrap().dataset;
    let report = evaluate(&m, &m.prepare(&ds).unwrap()).unwrap();
    assert_eq!(written, evaluation_document(&m, &data_cfg, &report));

    assert_eq!(std::fs::read(bundled_csv()).unwrap(), before);
}

#[test]
fn separable_data_gives_a_perfect_model() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("sep.csv");
    let mut text = String::from("x,z,label,group\n");
    for i in 0..40 {
        let x = f64::from(i) / 39.0;
        let z = if i % 3 == 0 { "NA".to_string() } else { format!("{}", (i * 7) % 11) };
        text.push_str(&format!("{x},{z},{},{}\n", u8::from(x > 0.5), i % 2));
    }
    std::fs::write(&csv, text).unwrap();
    let out = p(dir.path());
    let o = fairmip(&["--out", out, "train", "--data", p(&csv), "--n-tree", "1", "--depth", "1", "--batch-size", "40", "--lambda", "0"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let model = dir.path().join("model.json");
    assert_eq!(code(&fairmip(&["--out", out, "evaluate", "--model", p(&model), "--data", p(&csv)])), 0);
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("evaluation.json")).unwrap()).unwrap();
    assert_eq!(doc["report"]["accuracy"], 1.0);
}

#[test]
fn sweep_writes_one_row_per_lambda() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_small_config(dir.path());
    let out = p(dir.path());
    let small = ["--n-tree", "1", "--depth", "1", "--batch-size", "30"];
    let data = bundled_csv();

    let mut args = vec!["--config", p(&cfg), "--out", out, "sweep", "--data", p(&data), "--lambdas", "0.5"];
    args.extend(small);
    let o = fairmip(&args);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let table = std::fs::read_to_string(dir.path().join("tradeoff.csv")).unwrap();
    assert_eq!(table.lines().count(), 2);
    assert!(table.starts_with("lambda,accuracy,accuracy_se,metric,metric_value,metric_se\n"));
    assert_eq!(String::from_utf8_lossy(&o.stdout), table);

    let grid = "0.1,0.14,0.17,0.5,0.8,2.0";
    let mut args = vec!["--config", p(&cfg), "--out", out, "sweep", "--data", p(&data), "--lambdas", grid];
    args.extend(small);
    args.extend(["--repetitions", "1"]);
    assert_eq!(code(&fairmip(&args)), 0);
    let table = std::fs::read_to_string(dir.path().join("tradeoff.csv")).unwrap();
    let lambdas: Vec<&str> = table.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(lambdas, ["0.1", "0.14", "0.17", "0.5", "0.8", "2"]);
}

#[test]
fn verify_theory_reports_and_fails_on_injected_fault() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_small_config(dir.path());
    let o = fairmip(&["--config", p(&cfg), "--out", p(dir.path()), "verify-theory"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["all_pass"], true);
    let cell = report["checks"].as_array().unwrap().iter().find(|c| c["name"] == "lemma1_population_cell").unwrap();
    assert!((cell["computed"]["joint"].as_f64().unwrap() - 0.41).abs() < 1e-12);
    assert!(dir.path().join("theory.json").exists());

    let o = fairmip(&["--config", p(&cfg), "--out", p(dir.path()), "verify-theory", "--inject-fault"]);
    assert_eq!(code(&o), 3);
}

#[test]
fn inspect_exports_a_readable_program() {
    let dir = tempfile::tempdir().unwrap();
    let lp = dir.path().join("batch.lp");
    let o = fairmip(&["inspect", "--data", p(&bundled_csv()), "--export-lp", p(&lp), "--batch-size", "20", "--depth", "2"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let program = read_lp(&lp).unwrap();
    assert_eq!(program.n_binaries(), 3 * 4 + 4 + 4 * 20 * 3 + 20 * 4);
}
