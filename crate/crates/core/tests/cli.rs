//! End-to-end runs of the command-line driver on tiny toy datasets.

use std::fs;
use std::path::Path;

use valvetime::cli::{exit, run};
use valvetime::synth::{load_annotation_file, load_manifest};

fn cli(args: &[&str]) -> i32 {
    run(std::iter::once("valvetime").chain(args.iter().copied()))
}

fn s(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

const TINY: [&str; 6] = ["--preset", "toy", "--set", "train.max_epochs=1", "--set", "train.patience=0"];

fn with_tiny<'a>(rest: &[&'a str]) -> Vec<&'a str> {
    TINY.iter().copied().chain(rest.iter().copied()).collect()
}

#[test]
fn failures_map_to_documented_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = s(dir.path());
    let missing = s(&dir.path().join("nope.json"));
    assert_eq!(cli(&["eval", "--manifest", &missing, "--predictions", "x", "--out", &out]), exit::IO);
    assert_eq!(cli(&["report", "--report", &missing, "--out", &out]), exit::IO);
    assert_eq!(cli(&["--set", "train.no_such_key=1", "complexity"]), exit::CONFIG);
    assert_eq!(cli(&["--set", "train.patience=500", "complexity"]), exit::CONFIG);
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{\"seed\": 1, \"entries\": [").unwrap();
    assert_eq!(cli(&["labels", "--manifest", &s(&bad), "--out", &out]), exit::FORMAT);
    // Rejected inputs leave no run directory behind.
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    assert_eq!(cli(&["complexity", "--frames", "0"]), exit::USAGE);
    assert_eq!(cli(&["--help"]), exit::OK);
}

#[test]
fn complexity_reports_the_full_network() {
    assert_eq!(cli(&["complexity", "--model", "classification"]), exit::OK);
    assert_eq!(cli(&["complexity", "--model", "regression", "--json"]), exit::OK);
}

#[test]
fn pipeline_from_synthesis_to_report() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let data = root.join("data");
    assert_eq!(cli(&["--preset", "toy", "synth", "--seed", "3", "--n-patients", "3", "--run-dir", &s(&data)]), 0);
    let manifest_path = data.join("manifest.json");
    let manifest = load_manifest(&manifest_path).unwrap();
    assert_eq!(manifest.entries.len(), 9);
    let m = s(&manifest_path);

    // A second run into the same directory would overwrite a finished run.
    assert_eq!(cli(&["--preset", "toy", "synth", "--run-dir", &s(&data)]), exit::USAGE);

    assert_eq!(cli(&["--preset", "toy", "labels", "--manifest", &m, "--run-dir", &s(&root.join("labels"))]), 0);
    let first = &manifest.entries[0];
    let label: serde_json::Value =
        serde_json::from_slice(&fs::read(root.join("labels/labels").join(format!("{}.json", first.id))).unwrap()).unwrap();
    assert_eq!(label["values"].as_array().unwrap().len(), first.n_frames);

    let train_dir = root.join("train");
    let args = with_tiny(&["train", "--manifest", &m, "--k", "3", "--fold", "1"]);
    let train_dir_s = s(&train_dir);
    let mut args = args;
    args.extend(["--run-dir", train_dir_s.as_str()]);
    assert_eq!(cli(&args), 0);
    for f in ["config.json", "foldplan.json", "manifest.ref.json", "checkpoints/fold-01.json", "history/fold-01.csv", "reports/report.csv"] {
        assert!(train_dir.join(f).exists(), "{f} missing");
    }
    let history = fs::read_to_string(train_dir.join("history/fold-01.csv")).unwrap();
    assert_eq!(history.lines().next(), Some("epoch,train_loss,val_loss"));

    let ckpt = s(&train_dir.join("checkpoints/fold-01.json"));
    let single = root.join("infer-single");
    assert_eq!(cli(&["--preset", "toy", "infer", "--manifest", &m, "--checkpoint", &ckpt, "--run-dir", &s(&single)]), 0);
    let ensemble = root.join("infer-ensemble");
    assert_eq!(
        cli(&["--preset", "toy", "infer", "--manifest", &m, "--ensemble", &s(&train_dir), "--run-dir", &s(&ensemble)]),
        0
    );
    // An ensemble of one model equals that model.
    for e in &manifest.entries {
        let a = fs::read(single.join("predictions").join(format!("{}.json", e.id))).unwrap();
        let b = fs::read(ensemble.join("predictions").join(format!("{}.json", e.id))).unwrap();
        assert_eq!(a, b);
        let file = load_annotation_file(&single.join("predictions").join(format!("{}.json", e.id))).unwrap();
        assert_eq!(file.n_frames, e.n_frames);
        assert!(file.diagnostics.is_some());
    }

    let preds = s(&single.join("predictions"));
    let eval_dir = root.join("eval");
    assert_eq!(cli(&["eval", "--manifest", &m, "--predictions", &preds, "--run-dir", &s(&eval_dir)]), 0);
    let csv = fs::read_to_string(eval_dir.join("reports/report.csv")).unwrap();
    assert!(csv.starts_with("dataset,view,event,n_pairs"));

    let iv = root.join("intervals");
    assert_eq!(cli(&["intervals", "--manifest", &m, "--run-dir", &s(&iv)]), 0);
    let summary = fs::read_to_string(iv.join("reports/intervals_summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 5);

    let rep = root.join("report");
    let report_json = s(&eval_dir.join("reports/report.json"));
    assert_eq!(cli(&["report", "--report", &report_json, "--run-dir", &s(&rep)]), 0);
    assert!(rep.join("reports/report.md").exists());

    // Re-running eval from the snapshot reproduces the CSV.
    let again = root.join("eval-again");
    let snapshot = s(&eval_dir.join("config.json"));
    assert_eq!(
        cli(&["--config", &snapshot, "eval", "--manifest", &m, "--predictions", &preds, "--run-dir", &s(&again)]),
        0
    );
    assert_eq!(csv, fs::read_to_string(again.join("reports/report.csv")).unwrap());
}

#[test]
fn output_root_gets_numbered_run_directories() {
    let dir = tempfile::tempdir().unwrap();
    let out = s(dir.path());
    for _ in 0..2 {
        assert_eq!(cli(&["--preset", "toy", "synth", "--n-patients", "1", "--out", &out]), 0);
    }
    assert!(dir.path().join("synth-001/manifest.json").exists());
    assert!(dir.path().join("synth-002/manifest.json").exists());
}
