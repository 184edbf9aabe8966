//! Acceptance gate: one PASS/FAIL line per criterion, written straight to
//! stdout so it shows up even when the harness captures test output.
//!
//! Environment:
//! - `QUANVNET_GTSRB_ROOT`: a GTSRB-style training tree (`<class>/<image>.ppm`);
//!   when unset a seeded synthetic sign set is generated instead.
//! - `QUANVNET_SWEEP_EPOCHS`: epochs per run in the batch-size sweep (default 50).
//! - `QUANVNET_ACCEPTANCE_SEED`: seed for the desk-scale runs (default 1).

mod common;

use std::f64::consts::PI;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use common::*;
use num_complex::Complex64 as C64;
use quanvnet::data::{ImageTensor, Split};
use quanvnet::metrics::{macro_metrics, ConfusionMatrix};
use quanvnet::nn::{softmax_cross_entropy, Tensor};
use quanvnet::pipeline::{
    cmd_eval, cmd_prepare, cmd_quanv, cmd_report, cmd_synth, cmd_train, EvalArgs, EvalReport, Global, ModelKind,
    PrepareArgs, QuanvArgs, ReportArgs, SynthArgs, TrainArgs,
};
use quanvnet::qsim::{apply_gate, dense_circuit_matrix, gate_matrix, run_circuit, GateKind, GateOp, StateVector};
use quanvnet::quanv::{quanv_image, QuanvFilterSpec};
use quanvnet::rng::SeededRng;

const ORACLE_TOL: f64 = 1e-10;
const UNITARY_TOL: f64 = 1e-12;
const NORM_TOL: f64 = 1e-10;
const COS_TOL: f64 = 1e-6;
const GRAD_REL_TOL: f64 = 1e-5;
const GRAD_H: f64 = 1e-5;
const LN43_TOL: f64 = 1e-4;
const ROW_SUM_TOL: f64 = 1e-6;
const METRIC_TOL: f64 = 1e-4;
const MIN_TEST_ACCURACY: f64 = 0.85;
const GAP_POINTS: f64 = 0.02;

const ORACLE_BUDGET: Duration = Duration::from_secs(10);
const COS_BUDGET: Duration = Duration::from_secs(5);
const GRAD_BUDGET: Duration = Duration::from_secs(60);
const CHAIN_BUDGET: Duration = Duration::from_secs(30 * 60);

const EPOCHS: usize = 50;
const BATCH: usize = 16;
const SWEEP_BATCHES: [usize; 8] = [4, 8, 16, 32, 64, 128, 256, 512];

struct Gate {
    failed: Vec<usize>,
}

impl Gate {
    fn record(&mut self, id: usize, pass: bool, what: &str, detail: String) {
        let verdict = if pass { "PASS" } else { "FAIL" };
        line(&format!("criterion {id} {verdict} {what}: {detail}"));
        if !pass {
            self.failed.push(id);
        }
    }
}

fn line(s: &str) {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{s}");
    let _ = out.flush();
}

fn env_or<T: std::str::FromStr>(key: &str, default: T) -> T {
    std::env::var(key).ok().and_then(|v| v.parse().ok()).unwrap_or(default)
}

fn random_state(rng: &mut SeededRng, n: usize) -> StateVector {
    let mut amps: Vec<C64> = (0..1 << n).map(|_| C64::new(rng.unit_f64() - 0.5, rng.unit_f64() - 0.5)).collect();
    let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    amps.iter_mut().for_each(|a| *a /= norm);
    StateVector::from_amplitudes(amps).unwrap()
}

fn simulator_oracle(gate: &mut Gate) {
    let start = Instant::now();
    let mut rng = SeededRng::new(2024);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let n = 1 + rng.below(4);
        let len = rng.below(51);
        let circuit = random_circuit(&mut rng, n, len);
        let input = random_state(&mut rng, n);
        let got = run_circuit(&circuit, input.clone()).unwrap();
        let u = dense_circuit_matrix(&circuit).unwrap();
        for r in 0..1 << n {
            let want: C64 = (0..1 << n).map(|c| u.get(r, c) * input.amplitudes()[c]).sum();
            worst = worst.max((got.amplitudes()[r] - want).norm());
        }
    }
    let elapsed = start.elapsed();
    gate.record(
        1,
        worst <= ORACLE_TOL && elapsed < ORACLE_BUDGET,
        "simulator matches dense circuit matrix",
        format!("200 circuits, max deviation {worst:.2e} (tol {ORACLE_TOL:e}), {:.2}s (budget {}s)", elapsed.as_secs_f64(), ORACLE_BUDGET.as_secs()),
    );
}

fn unitarity_and_norm(gate: &mut Gate) {
    let mut rng = SeededRng::new(77);
    let (mut worst_u, mut worst_norm) = (0.0f64, 0.0f64);
    for kind in GateKind::ALL {
        for _ in 0..100 {
            let params: Vec<f64> = (0..kind.arity()).map(|_| (rng.unit_f64() - 0.5) * 4.0 * PI).collect();
            let u = gate_matrix(kind, &params).unwrap();
            let d = u.dim;
            for i in 0..d {
                for j in 0..d {
                    let dot: C64 = (0..d).map(|k| u.get(k, i).conj() * u.get(k, j)).sum();
                    let eye = if i == j { 1.0 } else { 0.0 };
                    worst_u = worst_u.max((dot - eye).norm());
                }
            }
            let targets = if kind.n_qubits() == 1 { vec![rng.below(3)] } else { vec![2, rng.below(2)] };
            let op = GateOp::new(kind, params, targets).unwrap();
            let out = apply_gate(random_state(&mut rng, 3), &op).unwrap();
            worst_norm = worst_norm.max((out.norm() - 1.0).abs());
        }
    }
    gate.record(
        2,
        worst_u <= UNITARY_TOL && worst_norm <= NORM_TOL,
        "gates are unitary and preserve norm",
        format!("13 kinds x 100 draws, max |U'U - I| {worst_u:.2e} (tol {UNITARY_TOL:e}), max norm drift {worst_norm:.2e} (tol {NORM_TOL:e})"),
    );
}

fn cos_oracle(gate: &mut Gate) {
    let start = Instant::now();
    let mut rng = SeededRng::new(31);
    let spec = QuanvFilterSpec::new(31, 0);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let img: ImageTensor = random_gray(&mut rng, 8, 8);
        let map = quanv_image(&img, &spec).unwrap();
        for y in 0..4 {
            for x in 0..4 {
                for c in 0..4 {
                    let p = img.at(2 * y + c / 2, 2 * x + c % 2, 0) as f64;
                    worst = worst.max((map.at(y, x, c) as f64 - (PI * p).cos()).abs());
                }
            }
        }
    }
    let elapsed = start.elapsed();
    gate.record(
        3,
        worst <= COS_TOL && elapsed < COS_BUDGET,
        "zero-layer quanvolution equals cos(pi * pixel)",
        format!("50 images, max deviation {worst:.2e} (tol {COS_TOL:e}), {:.2}s (budget {}s)", elapsed.as_secs_f64(), COS_BUDGET.as_secs()),
    );
}

fn gradient_check(gate: &mut Gate) {
    let start = Instant::now();
    let (worst, count) = tiny_gradient_check(1, GRAD_H);
    let elapsed = start.elapsed();
    gate.record(
        4,
        worst < GRAD_REL_TOL && elapsed < GRAD_BUDGET,
        "backprop matches central differences",
        format!(
            "{count} parameters, max relative error {worst:.2e} (tol {GRAD_REL_TOL:e}, floor {GRAD_REL_FLOOR:e}), {:.2}s (budget {}s)",
            elapsed.as_secs_f64(),
            GRAD_BUDGET.as_secs()
        ),
    );
}

fn cross_entropy_anchors(gate: &mut Gate) {
    let mut onehot = Tensor::<f64>::zeros(vec![1, 43]);
    onehot.data_mut()[7] = 1.0;
    let (loss, _) = softmax_cross_entropy(&Tensor::<f64>::zeros(vec![1, 43]), &onehot).unwrap();
    let anchor = (loss - 43f64.ln()).abs().max((loss - 3.7612).abs());

    let mut rng = SeededRng::new(5);
    let mut worst_row = 0.0f64;
    let (n, k) = (16, 43);
    let logits: Vec<f32> = (0..n * k).map(|_| (rng.unit_f64() * 20.0 - 10.0) as f32).collect();
    let mut hot = vec![0f32; n * k];
    for i in 0..n {
        hot[i * k + rng.below(k)] = 1.0;
    }
    let (_, grad) =
        softmax_cross_entropy(&Tensor::new(vec![n, k], logits).unwrap(), &Tensor::new(vec![n, k], hot).unwrap()).unwrap();
    for row in grad.data().chunks(k) {
        worst_row = worst_row.max(row.iter().map(|&v| v as f64).sum::<f64>().abs());
    }
    gate.record(
        5,
        anchor <= LN43_TOL && worst_row <= ROW_SUM_TOL,
        "cross-entropy anchors",
        format!("uniform 43-way loss {loss:.6} (ln 43 = {:.6}, tol {LN43_TOL:e}), max gradient row sum {worst_row:.2e} (tol {ROW_SUM_TOL:e})", 43f64.ln()),
    );
}

fn metrics_oracle(gate: &mut Gate) {
    let cm = ConfusionMatrix { n_classes: 2, counts: vec![vec![1, 1], vec![0, 2]] };
    let r = macro_metrics(&cm, 1.0).unwrap();
    // class 0: P 1/1, R 1/2, F1 2/3; class 1: P 2/3, R 2/2, F1 4/5
    let (p, rc, f) = (5.0 / 6.0, 3.0 / 4.0, 11.0 / 15.0);
    let dev = (r.macro_precision - p).abs().max((r.macro_recall - rc).abs()).max((r.macro_fbeta - f).abs());
    let printed = (p - 0.8333f64).abs().max((rc - 0.75f64).abs()).max((f - 0.7333f64).abs());
    gate.record(
        6,
        dev <= METRIC_TOL && printed <= METRIC_TOL,
        "macro metrics on [[1,1],[0,2]]",
        format!(
            "precision {:.4}, recall {:.4}, F1 {:.4} (expected 0.8333, 0.7500, 0.7333, tol {METRIC_TOL:e})",
            r.macro_precision, r.macro_recall, r.macro_fbeta
        ),
    );
}

struct Chain {
    manifest: PathBuf,
    cache: PathBuf,
    models: [PathBuf; 2],
    reports: [PathBuf; 2],
    accuracy: [f64; 2],
    elapsed: Duration,
}

fn data_root(work: &Path, seed: u64) -> (PathBuf, usize, usize) {
    match std::env::var("QUANVNET_GTSRB_ROOT") {
        Ok(root) => (PathBuf::from(root), 4, 400),
        Err(_) => {
            let out = work.join("signs");
            if !out.exists() {
                let args = SynthArgs { out: Some(out.clone()), n_classes: Some(4), ..Default::default() };
                cmd_synth(&args, &Global { seed: Some(seed), config: None }).unwrap();
            }
            (out, 4, 0)
        }
    }
}

fn train_and_eval(dir: &Path, input: &Path, kind: ModelKind, batch: usize, epochs: usize, g: &Global) -> (PathBuf, PathBuf, f64) {
    let model = dir.join(format!("{}_b{batch}.tsqm", kind.as_str()));
    let report = dir.join(format!("{}_b{batch}.json", kind.as_str()));
    let train = TrainArgs {
        input: Some(input.to_owned()),
        model: Some(kind),
        batch_size: Some(batch),
        epochs: Some(epochs),
        out: Some(model.clone()),
        ..Default::default()
    };
    cmd_train(&train, g).unwrap();
    let eval = EvalArgs {
        model_file: Some(model.clone()),
        input: Some(input.to_owned()),
        split: Some(Split::Test),
        out_report: Some(report.clone()),
        ..Default::default()
    };
    let acc = cmd_eval(&eval, g).unwrap().report.metrics.accuracy;
    (model, report, acc)
}

fn desk_chain(work: &Path, out: &Path, seed: u64) -> Chain {
    let (root, n_classes, max_samples) = data_root(work, seed);
    fs::create_dir_all(out).unwrap();
    let g = Global { seed: Some(seed), config: None };
    let start = Instant::now();
    let manifest = out.join("manifest.csv");
    let prep = PrepareArgs {
        root: Some(root),
        out_manifest: Some(manifest.clone()),
        n_classes: Some(n_classes),
        max_samples: Some(max_samples),
        ..Default::default()
    };
    let prepared = cmd_prepare(&prep, &g).unwrap();
    let cache = out.join("cache");
    let quanv = QuanvArgs { manifest: Some(manifest.clone()), cache_dir: Some(cache.clone()), ..Default::default() };
    cmd_quanv(&quanv, &g).unwrap();
    let (m0, r0, a0) = train_and_eval(out, &manifest, ModelKind::Classical, BATCH, EPOCHS, &g);
    let (m1, r1, a1) = train_and_eval(out, &cache, ModelKind::Quanv, BATCH, EPOCHS, &g);
    line(&format!(
        "  chain: {} images in manifest, classical test accuracy {a0:.4}, quanv test accuracy {a1:.4}",
        prepared.manifest.records.len()
    ));
    Chain { manifest, cache, models: [m0, m1], reports: [r0, r1], accuracy: [a0, a1], elapsed: start.elapsed() }
}

fn same_bytes(a: &Path, b: &Path) -> bool {
    fs::read(a).unwrap() == fs::read(b).unwrap()
}

#[test]
fn acceptance_criteria() {
    let mut gate = Gate { failed: Vec::new() };
    simulator_oracle(&mut gate);
    unitarity_and_norm(&mut gate);
    cos_oracle(&mut gate);
    gradient_check(&mut gate);
    cross_entropy_anchors(&mut gate);
    metrics_oracle(&mut gate);

    let seed: u64 = env_or("QUANVNET_ACCEPTANCE_SEED", 1);
    let work = tempfile::tempdir().unwrap();
    let source = if std::env::var("QUANVNET_GTSRB_ROOT").is_ok() { "GTSRB subset" } else { "synthetic signs" };
    let first = desk_chain(work.path(), &work.path().join("run1"), seed);
    gate.record(
        7,
        first.accuracy.iter().all(|&a| a >= MIN_TEST_ACCURACY) && first.elapsed < CHAIN_BUDGET,
        "desk-scale end to end",
        format!(
            "{source}, 4 classes, {EPOCHS} epochs, batch {BATCH}: classical {:.4}, quanv {:.4} (min {MIN_TEST_ACCURACY}), chain {:.0}s (budget {}s)",
            first.accuracy[0],
            first.accuracy[1],
            first.elapsed.as_secs_f64(),
            CHAIN_BUDGET.as_secs()
        ),
    );

    let sweep_epochs: usize = env_or("QUANVNET_SWEEP_EPOCHS", EPOCHS);
    let g = Global { seed: Some(seed), config: None };
    let sweep_dir = work.path().join("sweep");
    fs::create_dir_all(&sweep_dir).unwrap();
    let mut reports = Vec::new();
    for batch in SWEEP_BATCHES {
        if batch == BATCH && sweep_epochs == EPOCHS {
            reports.extend(first.reports.iter().cloned());
            continue;
        }
        reports.push(train_and_eval(&sweep_dir, &first.manifest, ModelKind::Classical, batch, sweep_epochs, &g).1);
        reports.push(train_and_eval(&sweep_dir, &first.cache, ModelKind::Quanv, batch, sweep_epochs, &g).1);
    }
    let table = cmd_report(&ReportArgs { reports, out: Some(sweep_dir.join("table.csv")) }, &g).unwrap().table;
    for l in table.to_text().lines() {
        line(&format!("  {l}"));
    }
    let complete = table.rows.len() == SWEEP_BATCHES.len()
        && table.rows.iter().all(|(_, cells)| cells.iter().all(|pair| pair.iter().all(Option::is_some)));
    let flipped: Vec<String> = table
        .rows
        .iter()
        .filter_map(|(batch, cells)| {
            let [cnn, qnn] = cells[0];
            (cnn? < qnn? - GAP_POINTS).then(|| format!("{batch} ({:.4} vs {:.4})", cnn.unwrap(), qnn.unwrap()))
        })
        .collect();
    let gap = if flipped.is_empty() {
        "classical within 2 points of or above quanv at every batch size".to_owned()
    } else {
        format!("FLAGGED for inspection, quanv ahead by more than 2 points at batch {}", flipped.join(", "))
    };
    gate.record(
        8,
        complete,
        "batch-size sweep report",
        format!("{} rows x 2 models x 4 metrics at {sweep_epochs} epochs; {gap}", table.rows.len()),
    );

    // a full repeat: regenerate the data at the same root, rerun every step
    if std::env::var("QUANVNET_GTSRB_ROOT").is_err() {
        fs::remove_dir_all(work.path().join("signs")).unwrap();
    }
    let second = desk_chain(work.path(), &work.path().join("run2"), seed);
    let mut pairs = vec![(first.manifest.clone(), second.manifest.clone())];
    for split in Split::ALL {
        let name = format!("{split}.qnvf");
        pairs.push((first.cache.join(&name), second.cache.join(&name)));
    }
    for i in 0..2 {
        pairs.push((first.models[i].clone(), second.models[i].clone()));
        pairs.push((first.reports[i].clone(), second.reports[i].clone()));
        pairs.push((first.reports[i].with_extension("csv"), second.reports[i].with_extension("csv")));
    }
    let differing: Vec<String> = pairs
        .iter()
        .filter(|(a, b)| !same_bytes(a, b))
        .map(|(a, _)| a.file_name().unwrap().to_string_lossy().into_owned())
        .collect();
    let identical_reports = first.reports.iter().zip(&second.reports).all(|(a, b)| {
        let (a, b) = (EvalReport::load(a).unwrap(), EvalReport::load(b).unwrap());
        a.metrics.accuracy == b.metrics.accuracy
    });
    gate.record(
        9,
        differing.is_empty() && identical_reports,
        "repeat run is bit-identical",
        if differing.is_empty() {
            format!("{} artifacts compared byte for byte", pairs.len())
        } else {
            format!("differing: {}", differing.join(", "))
        },
    );

    assert!(gate.failed.is_empty(), "failed criteria: {:?}", gate.failed);
}
