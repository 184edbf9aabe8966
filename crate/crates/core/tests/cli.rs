use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use quanvnet::data::DatasetManifest;
use quanvnet::pipeline::EvalReport;

fn quanvnet(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_quanvnet"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("spawn quanvnet")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = quanvnet(dir, args);
    let stderr = String::from_utf8_lossy(&out.stderr).into_owned();
    assert!(out.status.success(), "{args:?} failed:\n{stderr}");
    stderr + &String::from_utf8_lossy(&out.stdout)
}

fn synth(dir: &Path, n_classes: &str, per_class: &str, min: &str, max: &str) {
    ok(dir, &["synth", "--out", "signs", "--n-classes", n_classes, "--per-class", per_class, "--min-side", min, "--max-side", max, "--seed", "3"]);
}

#[test]
fn prepare_is_deterministic_and_records_settings() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth(d, "3", "14", "60", "90");
    ok(d, &["prepare", "--root", "signs", "--out-manifest", "a.csv", "--seed", "9"]);
    ok(d, &["prepare", "--root", "signs", "--out-manifest", "b.csv", "--seed", "9"]);
    assert_eq!(fs::read(d.join("a.csv")).unwrap(), fs::read(d.join("b.csv")).unwrap());
    let sidecar = fs::read_to_string(d.join("a.csv.run.cfg")).unwrap();
    assert!(sidecar.contains("seed = 9") && sidecar.contains("min_size = 64"), "{sidecar}");

    let m = DatasetManifest::load(&d.join("a.csv")).unwrap();
    assert_eq!(m.n_classes, 3);
    assert!(m.records.iter().all(|r| r.split.is_some()));

    ok(d, &["prepare", "--root", "signs", "--out-manifest", "c.csv", "--seed", "10"]);
    assert_ne!(fs::read(d.join("a.csv")).unwrap(), fs::read(d.join("c.csv")).unwrap());
}

#[test]
fn config_file_sits_between_flags_and_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth(d, "2", "10", "70", "80");
    fs::write(d.join("run.cfg"), "root = signs\nmin_size = 50\nseed = 4\n").unwrap();
    ok(d, &["--config", "run.cfg", "prepare", "--out-manifest", "m.csv", "--seed", "5"]);
    let sidecar = fs::read_to_string(d.join("m.csv.run.cfg")).unwrap();
    assert!(sidecar.contains("min_size = 50") && sidecar.contains("seed = 5"), "{sidecar}");
}

#[test]
fn prepare_fails_when_no_image_passes_the_size_filter() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth(d, "2", "4", "32", "32");
    let out = quanvnet(d, &["prepare", "--root", "signs", "--out-manifest", "m.csv"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("error:"));
    assert!(!d.join("m.csv").exists());
}

#[test]
fn prepare_handles_all_43_classes_and_a_subset() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth(d, "43", "10", "66", "70");
    ok(d, &["prepare", "--root", "signs", "--out-manifest", "all.csv"]);
    let m = DatasetManifest::load(&d.join("all.csv")).unwrap();
    assert_eq!((m.n_classes, m.records.len()), (43, 430));
    assert_eq!(m.class_names[42], "00042");
    ok(d, &["prepare", "--root", "signs", "--out-manifest", "four.csv", "--n-classes", "4"]);
    assert_eq!(DatasetManifest::load(&d.join("four.csv")).unwrap().n_classes, 4);
    let out = quanvnet(d, &["prepare", "--root", "signs", "--out-manifest", "x.csv", "--n-classes", "44"]);
    assert!(!out.status.success());
}

#[test]
fn zero_layer_quanv_runs_the_cos_spot_check() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth(d, "2", "10", "66", "70");
    ok(d, &["prepare", "--root", "signs", "--out-manifest", "m.csv"]);
    let log = ok(d, &["quanv", "--manifest", "m.csv", "--cache-dir", "c0", "--layers", "0"]);
    assert!(log.contains("cos identity spot check"), "{log}");
}

#[test]
fn full_chain_on_a_small_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth(d, "3", "14", "66", "80");
    ok(d, &["prepare", "--root", "signs", "--out-manifest", "m.csv", "--seed", "1"]);
    ok(d, &["quanv", "--manifest", "m.csv", "--cache-dir", "cache", "--seed", "1"]);
    let cache_file = d.join("cache").join("train.qnvf");
    let bytes = fs::read(&cache_file).unwrap();
    let rerun = ok(d, &["quanv", "--manifest", "m.csv", "--cache-dir", "cache", "--seed", "1"]);
    assert!(rerun.contains("cache up to date"), "{rerun}");
    assert_eq!(fs::read(&cache_file).unwrap(), bytes);

    for (kind, input) in [("classical", "m.csv"), ("quanv", "cache")] {
        for out in ["a", "b"] {
            let model = format!("{kind}_{out}.tsqm");
            ok(d, &["train", "--input", input, "--model", kind, "--epochs", "2", "--batch-size", "8", "--out", &model, "--seed", "1"]);
        }
        let a = fs::read(d.join(format!("{kind}_a.tsqm"))).unwrap();
        assert_eq!(a, fs::read(d.join(format!("{kind}_b.tsqm"))).unwrap());
        let history = fs::read_to_string(d.join(format!("{kind}_a.tsqm.history.csv"))).unwrap();
        assert_eq!(history.lines().count(), 3);

        let report = format!("{kind}.json");
        ok(d, &["eval", "--model-file", &format!("{kind}_a.tsqm"), "--input", input, "--out-report", &report]);
        let r = EvalReport::load(&d.join(&report)).unwrap();
        assert_eq!((r.batch_size, r.n_classes, r.split.as_str()), (8, 3, "test"));
        let csv = fs::read_to_string(d.join(format!("{kind}.csv"))).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "model,batch_size,accuracy,precision,recall,fbeta");
        assert_eq!(lines[1].split(',').count(), 6);
    }

    // wrong input kind for the model
    assert!(!quanvnet(d, &["eval", "--model-file", "quanv_a.tsqm", "--input", "m.csv", "--out-report", "x.json"]).status.success());

    let table = ok(d, &["report", "classical.json", "quanv.json", "--out", "table.csv"]);
    assert!(table.contains("accuracy") && table.contains("QNN"));
    let csv = fs::read_to_string(d.join("table.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
    assert!(!csv.contains('-'), "{csv}");
    assert!(d.join("table.txt").exists());

    ok(d, &["report", "classical.json", "--out", "half.csv"]);
    assert!(fs::read_to_string(d.join("half.csv")).unwrap().lines().nth(1).unwrap().ends_with(",-"));
    let dup = quanvnet(d, &["report", "classical.json", "classical.json", "--out", "dup.csv"]);
    assert!(!dup.status.success());
}

#[test]
fn overfit_model_scores_perfectly_on_its_training_split() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth(d, "2", "10", "66", "70");
    ok(d, &["prepare", "--root", "signs", "--out-manifest", "m.csv", "--seed", "2"]);
    ok(d, &["quanv", "--manifest", "m.csv", "--cache-dir", "cache", "--seed", "2"]);
    ok(d, &["train", "--input", "cache", "--model", "quanv", "--epochs", "40", "--batch-size", "4", "--out", "q.tsqm", "--seed", "2"]);
    ok(d, &["eval", "--model-file", "q.tsqm", "--input", "cache", "--split", "train", "--out-report", "r.json"]);
    let r = EvalReport::load(&d.join("r.json")).unwrap();
    assert_eq!(r.metrics.accuracy, 1.0);
    assert!(r.metrics.top_confused_pairs.is_empty());
    assert_eq!(r.confusion_matrix.trace(), r.confusion_matrix.total());
}

#[test]
fn missing_required_arguments_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = quanvnet(dir.path(), &["train", "--input", "nowhere.csv"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("model"));
}
