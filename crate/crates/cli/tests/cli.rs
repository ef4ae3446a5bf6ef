use std::path::Path;
use std::process::{Command, Output};

use finn_core::io::{load_checkpoint, preset, read_dataset, save_checkpoint, KeyValues};
use finn_core::model::FinnParams;
use finn_core::train::ModelInit;

fn finn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_finn"))
        .args(args)
        .env("FINN_LOG", "quiet")
        .output()
        .expect("spawn finn")
}

fn ok(args: &[&str]) -> Output {
    let out = finn(args);
    assert!(
        out.status.success(),
        "finn {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn frozen_checkpoint(dir: &Path) -> std::path::PathBuf {
    let soil = preset("synthetic-train").unwrap().soil;
    let path = dir.join("frozen.bin");
    save_checkpoint(&path, &FinnParams::frozen_physics(&soil, 2.0).to_store()).unwrap();
    path
}

#[test]
fn generate_writes_a_full_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("train");
    let svg = dir.path().join("bt.svg");
    ok(&["generate", "--preset", "synthetic-train", "--out", s(&out), "--svg", s(&svg)]);
    let data = read_dataset(&out).unwrap();
    assert_eq!(data.n_times(), 2000);
    assert_eq!(data.n_volumes(), 26);
    assert_eq!(data.meta.soil.unwrap().d_e, 5e-4);
    let c_csv = std::fs::read_to_string(out.join("c.csv")).unwrap();
    assert_eq!(c_csv.lines().count(), 2000);
    assert!(c_csv.lines().all(|l| l.split(',').count() == 26));
    let m = KeyValues::read(&out.join("manifest.txt")).unwrap();
    assert_eq!(m.get("command"), Some("generate"));
    assert!(out.join("scenario.cfg").is_file());
    assert!(std::fs::read_to_string(&svg).unwrap().starts_with("<svg"));
}

#[test]
fn generate_noise_is_seeded() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, seed: &str| {
        let out = dir.path().join(name);
        ok(&["generate", "--preset", "core1", "--out", s(&out), "--noise", "1e-3", "--seed", seed]);
        read_dataset(&out).unwrap()
    };
    let (a, b, c) = (run("a", "4"), run("b", "4"), run("c", "5"));
    assert_eq!(a, b);
    assert_ne!(a.c, c.c);
}

#[test]
fn zero_epoch_training_saves_the_initialization() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let model = dir.path().join("model");
    ok(&["generate", "--preset", "synthetic-train", "--out", s(&data)]);
    ok(&["train", "--data", s(&data), "--out", s(&model), "--epochs", "0", "--window", "20", "--seed", "3"]);
    let saved = FinnParams::from_store(&load_checkpoint(&model.join("checkpoint.bin")).unwrap()).unwrap();
    let p = preset("synthetic-train").unwrap();
    let init = FinnParams::synthetic(3, ModelInit::default_unit(p.grid.dx, p.dt), 2.0).unwrap();
    assert_eq!(saved, init);
    let history = std::fs::read_to_string(model.join("history.csv")).unwrap();
    assert_eq!(history.lines().count(), 1);
    assert!(model.join("final.bin").is_file());
    let m = KeyValues::read(&model.join("manifest.txt")).unwrap();
    assert_eq!(m.get("epochs"), Some("0"));
    assert_eq!(m.get("seed"), Some("3"));
}

#[test]
fn short_training_records_history() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let model = dir.path().join("model");
    ok(&["generate", "--preset", "synthetic-train", "--out", s(&data)]);
    ok(&[
        "train", "--data", s(&data), "--out", s(&model), "--epochs", "2", "--window", "15", "--mask", "breakthrough",
        "--mode", "experimental", "--integrator", "rk4", "--substeps", "2",
    ]);
    let history = std::fs::read_to_string(model.join("history.csv")).unwrap();
    assert_eq!(history.lines().count(), 3);
    assert!(history.starts_with("epoch,loss,lr,seconds\n0,"));
    let saved = FinnParams::from_store(&load_checkpoint(&model.join("checkpoint.bin")).unwrap()).unwrap();
    assert_eq!(saved.known_d_e, Some(5e-4));
}

#[test]
fn frozen_physics_evaluates_to_zero() {
    let dir = tempfile::tempdir().unwrap();
    let (train, test, report) = (dir.path().join("train"), dir.path().join("test"), dir.path().join("report"));
    ok(&["generate", "--preset", "synthetic-train", "--out", s(&train)]);
    ok(&["generate", "--preset", "synthetic-test", "--out", s(&test)]);
    let ckpt = frozen_checkpoint(dir.path());
    ok(&["evaluate", "--ckpt", s(&ckpt), "--train", s(&train), "--test", s(&test), "--out", s(&report)]);
    let csv = std::fs::read_to_string(report.join("report.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("window,row_start,row_end,mse"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.iter().map(|r| r[0]).collect::<Vec<_>>(), ["training", "extrapolated", "unseen"]);
    assert_eq!((rows[0][1], rows[0][2], rows[1][2]), ("0", "500", "2000"));
    for r in &rows {
        assert!(r[3].parse::<f64>().unwrap() < 1e-8, "{r:?}");
    }
    assert!(report.join("manifest.txt").is_file());
}

#[test]
fn predict_and_extract_with_a_frozen_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let ckpt = frozen_checkpoint(dir.path());
    let pred = dir.path().join("pred");
    ok(&["predict", "--ckpt", s(&ckpt), "--preset", "synthetic-test", "--out", s(&pred), "--t-end", "100"]);
    let data = read_dataset(&pred).unwrap();
    assert_eq!(data.n_times(), 21);
    assert_eq!(data.meta.provenance, "predict:synthetic-test");

    let csv_path = dir.path().join("curves").join("r.csv");
    ok(&["extract-retardation", "--ckpt", s(&ckpt), "--out", s(&csv_path), "--points", "5", "--c-min", "0.2"]);
    let csv = std::fs::read_to_string(&csv_path).unwrap();
    let rows: Vec<(f64, f64)> = csv
        .lines()
        .skip(1)
        .map(|l| {
            let (c, r) = l.split_once(',').unwrap();
            (c.parse().unwrap(), r.parse().unwrap())
        })
        .collect();
    assert_eq!(rows.len(), 5);
    assert_eq!(rows[0].0, 0.2);
    assert_eq!(rows[4].0, 1.0);
    assert!((rows[4].1 - 3.1754).abs() < 1e-3);
    assert!(rows.windows(2).all(|w| w[1].1 < w[0].1));
    assert!(dir.path().join("curves").join("r.csv.manifest").is_file());
}

#[test]
fn extraction_needs_porosity_without_known_diffusion() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("syn.bin");
    save_checkpoint(&path, &FinnParams::synthetic(0, 3.2e-4, 2.0).unwrap().to_store()).unwrap();
    let out = dir.path().join("r.csv");
    assert_eq!(finn(&["extract-retardation", "--ckpt", s(&path), "--out", s(&out)]).status.code(), Some(1));
    ok(&["extract-retardation", "--ckpt", s(&path), "--out", s(&out), "--porosity", "0.29"]);
}

#[test]
fn small_experiment_writes_a_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("exp");
    ok(&["experiment", "--seeds", "2", "--epochs", "1", "--window", "10", "--out", s(&out), "--threads", "1"]);
    let summary = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    let labels: Vec<&str> = summary.lines().map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(labels, ["seed", "0", "1", "mean", "std"]);
    assert!(out.join("seed-1").join("checkpoint.bin").is_file());
    assert!(out.join("manifest.txt").is_file());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x");
    assert_eq!(finn(&["generate", "--preset", "synthetic-train"]).status.code(), Some(1));
    assert_eq!(finn(&["train", "--bogus"]).status.code(), Some(1));
    assert_eq!(
        finn(&["generate", "--preset", "synthetic-train", "--out", s(&out), "--noise", "-1"]).status.code(),
        Some(1)
    );
    assert_eq!(finn(&["generate", "--preset", "core9", "--out", s(&out)]).status.code(), Some(1));
    let missing = dir.path().join("missing");
    assert_eq!(finn(&["train", "--data", s(&missing), "--out", s(&out)]).status.code(), Some(2));
    assert_eq!(finn(&["--help"]).status.code(), Some(0));
}

#[test]
fn invalid_log_level_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_finn"))
        .args(["generate", "--preset", "core1", "--out", s(&dir.path().join("d"))])
        .env("FINN_LOG", "loud")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("FINN_LOG"));
}

#[test]
fn output_may_not_overwrite_input() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    ok(&["generate", "--preset", "core1", "--out", s(&data)]);
    let out = finn(&["train", "--data", s(&data), "--out", s(&data), "--epochs", "0", "--window", "5"]);
    assert_eq!(out.status.code(), Some(1));
}
