//! The experiment commands: `prepare → quanv → train → eval → report`.
//!
//! Every command resolves its settings from explicit flags over an optional
//! `key = value` file over built-in defaults. The resolved values are echoed
//! into a `<artifact>.run.cfg` sidecar, and the hash of the non-path
//! settings is embedded in binary and JSON artifacts, so repeated runs that
//! only differ in output locations produce identical bytes.
//!
//! Progress goes to standard error; results go to files.

use std::fmt;
use std::fs::{self, OpenOptions};
use std::io::ErrorKind;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::KeyValues;
use crate::data::{
    filter_by_size, load_preprocessed, native_dims, scan_dataset_dir, split_dataset, subsample_stratified,
    DatasetManifest, Split, SplitRatios, INPUT_SIZE,
};
use crate::error::{Error, IoContext, Result};
use crate::hash::{hash_bytes, to_hex};
use crate::metrics::{confusion_matrix, macro_metrics, summary_row, ConfusionMatrix, MetricsReport, SUMMARY_HEADER};
use crate::nn::{
    load_model, predict, save_model, train_with_progress, write_history_csv, Dataset, EpochStats, ModelFile,
    ModelSpec, TrainConfig,
};
use crate::quanv::{quanv_dataset, read_cache, CacheIndex, QuanvFilterSpec};
use crate::synth::{generate_dataset, SynthConfig};

/// Flags shared by every command.
#[derive(Clone, Debug, Default)]
pub struct Global {
    pub seed: Option<u64>,
    pub config: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    /// Raw 64×64 grayscale images.
    Classical,
    /// Cached quanvolution features.
    Quanv,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Classical => "classical",
            ModelKind::Quanv => "quanv",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "classical" | "cnn" => Ok(ModelKind::Classical),
            "quanv" | "qnn" => Ok(ModelKind::Quanv),
            _ => Err(Error::Config(format!("unknown model kind {s:?} (classical|quanv)"))),
        }
    }
}

/// Fully resolved settings of one command invocation.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub command: String,
    /// Values that determine the results; hashed.
    pub settings: KeyValues,
    /// Input and output locations; echoed but not hashed.
    pub paths: KeyValues,
}

impl RunConfig {
    pub fn hash(&self) -> u64 {
        let mut kv = self.settings.clone();
        kv.set("command", &self.command);
        kv.content_hash()
    }

    pub fn to_text(&self) -> String {
        let mut kv = KeyValues::new();
        kv.set("command", &self.command).set("run_hash", to_hex(self.hash()));
        kv.merge(&self.settings);
        kv.merge(&self.paths);
        kv.to_text()
    }

    pub fn sidecar_path(artifact: &Path) -> PathBuf {
        suffixed(artifact, ".run.cfg")
    }

    /// Writes `<artifact>.run.cfg` unless it already holds the same text.
    pub fn write_sidecar(&self, artifact: &Path) -> Result<PathBuf> {
        let path = Self::sidecar_path(artifact);
        write_if_changed(&path, &self.to_text())?;
        Ok(path)
    }
}

fn suffixed(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn write_if_changed(path: &Path, text: &str) -> Result<bool> {
    if fs::read_to_string(path).ok().as_deref() == Some(text) {
        return Ok(false);
    }
    fs::write(path, text).at(path)?;
    Ok(true)
}

fn ensure_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => fs::create_dir_all(p).at(p),
        _ => Ok(()),
    }
}

/// Exclusive `<artifact>.lock` held for the duration of a command.
struct LockGuard(PathBuf);

impl LockGuard {
    fn acquire(artifact: &Path) -> Result<Self> {
        let path = suffixed(artifact, ".lock");
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(LockGuard(path)),
            Err(e) if e.kind() == ErrorKind::AlreadyExists => Err(Error::Config(format!(
                "{} is in use by another run (delete {} if it is stale)",
                artifact.display(),
                path.display()
            ))),
            Err(e) => Err(Error::io(path, e)),
        }
    }
}

impl Drop for LockGuard {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.0);
    }
}

/// Resolution order: flag, then config file, then default.
struct Resolver {
    file: KeyValues,
    run: RunConfig,
}

impl Resolver {
    fn new(command: &str, global: &Global) -> Result<Self> {
        let file = match &global.config {
            Some(p) => KeyValues::load(p)?,
            None => KeyValues::new(),
        };
        let mut r = Resolver {
            file,
            run: RunConfig {
                command: command.to_owned(),
                settings: KeyValues::new(),
                paths: KeyValues::new(),
            },
        };
        r.setting("seed", global.seed, Some(0u64))?;
        Ok(r)
    }

    fn lookup<T: FromStr>(&self, keys: &[&str]) -> Result<Option<T>> {
        for k in keys {
            if let Some(v) = self.file.get_parsed(k)? {
                return Ok(Some(v));
            }
        }
        Ok(None)
    }

    fn setting<T: FromStr + fmt::Display>(&mut self, key: &str, flag: Option<T>, default: Option<T>) -> Result<T> {
        let v = match flag {
            Some(v) => v,
            None => self
                .lookup(&[key])?
                .or(default)
                .ok_or_else(|| Error::Config(format!("missing required setting `{key}`")))?,
        };
        self.run.settings.set(key, &v);
        Ok(v)
    }

    fn path(&mut self, key: &str, flag: Option<PathBuf>, file_keys: &[&str], default: Option<&str>) -> Result<PathBuf> {
        let v = match flag {
            Some(v) => v,
            None => self
                .lookup::<PathBuf>(file_keys)?
                .or_else(|| default.map(PathBuf::from))
                .ok_or_else(|| Error::Config(format!("missing required path `{key}`")))?,
        };
        self.run.paths.set(key, v.display());
        Ok(v)
    }

    fn seed(&self) -> u64 {
        self.run.settings.get_parsed("seed").ok().flatten().unwrap_or(0)
    }

    fn finish(self) -> RunConfig {
        self.run
    }
}

// ---------------------------------------------------------------- prepare

#[derive(Clone, Debug, Default)]
pub struct PrepareArgs {
    pub root: Option<PathBuf>,
    pub out_manifest: Option<PathBuf>,
    pub min_size: Option<usize>,
    /// `0` keeps every image.
    pub max_samples: Option<usize>,
    /// Keep only the first N class directories; `0` keeps all.
    pub n_classes: Option<usize>,
}

#[derive(Clone, Debug)]
pub struct PrepareOutcome {
    pub manifest: DatasetManifest,
    pub path: PathBuf,
    pub run: RunConfig,
}

pub fn cmd_prepare(args: &PrepareArgs, global: &Global) -> Result<PrepareOutcome> {
    let mut r = Resolver::new("prepare", global)?;
    let root = r.path("root", args.root.clone(), &["root"], None)?;
    let out = r.path("out_manifest", args.out_manifest.clone(), &["out_manifest", "manifest"], Some("manifest.csv"))?;
    let min_size = r.setting("min_size", args.min_size, Some(INPUT_SIZE))?;
    let max_samples = r.setting("max_samples", args.max_samples, Some(0usize))?;
    let n_classes = r.setting("n_classes", args.n_classes, Some(0usize))?;
    let seed = r.seed();
    let run = r.finish();

    if !root.is_dir() {
        return Err(Error::Config(format!("dataset root {} is not a directory", root.display())));
    }
    let mut scanned = scan_dataset_dir(&root)?;
    if n_classes > 0 {
        if n_classes > scanned.n_classes {
            return Err(Error::Config(format!(
                "asked for {n_classes} classes but {} has {}",
                root.display(),
                scanned.n_classes
            )));
        }
        scanned.records.retain(|rec| rec.class_id < n_classes);
        scanned.class_names.truncate(n_classes);
        scanned.n_classes = n_classes;
    }
    let found = scanned.records.len();
    let kept = filter_by_size(native_dims(&scanned)?, min_size);
    eprintln!("prepare: {found} images found, {} larger than {min_size}x{min_size}", kept.len());
    if kept.is_empty() {
        return Err(Error::Validation(format!(
            "no images larger than {min_size}x{min_size} under {}: manifest would be empty",
            root.display()
        )));
    }
    let mut manifest = DatasetManifest { records: kept, ..scanned };
    if max_samples > 0 {
        manifest = subsample_stratified(&manifest, max_samples, seed);
    }
    let manifest = split_dataset(&manifest, SplitRatios::default(), seed)?;

    ensure_parent(&out)?;
    let _lock = LockGuard::acquire(&out)?;
    manifest.save(&out)?;
    run.write_sidecar(&out)?;
    eprintln!("{:>8} {:>6} {:>6} {:>6}", "class", "train", "val", "test");
    for (c, counts) in manifest.class_counts().iter().enumerate() {
        eprintln!("{:>8} {:>6} {:>6} {:>6}", manifest.class_names[c], counts[0], counts[1], counts[2]);
    }
    Ok(PrepareOutcome { manifest, path: out, run })
}

// ------------------------------------------------------------------ quanv

#[derive(Clone, Debug, Default)]
pub struct QuanvArgs {
    pub manifest: Option<PathBuf>,
    pub cache_dir: Option<PathBuf>,
    pub layers: Option<usize>,
    pub n_filters: Option<usize>,
}

#[derive(Clone, Debug)]
pub struct QuanvOutcome {
    pub index: CacheIndex,
    pub up_to_date: bool,
    /// Largest deviation from `cos(π·pixel)` over the spot-checked records
    /// (zero-layer filters only).
    pub spot_check: Option<f64>,
    pub seconds: f64,
    pub run: RunConfig,
}

/// Tolerance of the analytic spot check for float32 features.
pub const COS_SPOT_CHECK_TOL: f64 = 1e-6;

pub fn cmd_quanv(args: &QuanvArgs, global: &Global) -> Result<QuanvOutcome> {
    let mut r = Resolver::new("quanv", global)?;
    let manifest_path = r.path("manifest", args.manifest.clone(), &["manifest", "out_manifest"], None)?;
    let cache_dir = r.path("cache_dir", args.cache_dir.clone(), &["cache_dir"], Some("cache"))?;
    let layers = r.setting("layers", args.layers, Some(2usize))?;
    let n_filters = r.setting("n_filters", args.n_filters, Some(1usize))?;
    let seed = r.seed();
    let manifest = DatasetManifest::load(&manifest_path)?;
    r.run.settings.set("dataset_hash", to_hex(manifest.content_hash()?));
    let run = r.finish();
    let spec = QuanvFilterSpec { n_random_layers: layers, seed, n_filters, ..Default::default() };

    fs::create_dir_all(&cache_dir).at(&cache_dir)?;
    let _lock = LockGuard::acquire(&cache_dir.join("quanv"))?;
    let start = Instant::now();
    let index = quanv_dataset(&manifest, &spec, &cache_dir)?;
    let seconds = start.elapsed().as_secs_f64();
    run.write_sidecar(&cache_dir.join("quanv"))?;
    let up_to_date = index.up_to_date();
    for s in &index.splits {
        eprintln!("quanv: {:<5} {:>6} records{}", s.split, s.records, if s.rewritten { "" } else { " (unchanged)" });
    }
    for (path, why) in &index.skipped {
        eprintln!("quanv: skipped {path}: {why}");
    }
    if up_to_date {
        eprintln!("quanv: cache up to date");
    } else {
        eprintln!("quanv: done in {seconds:.1}s");
    }
    let spot_check = if layers == 0 { Some(cos_spot_check(&manifest, &index, &spec)?) } else { None };
    if let Some(dev) = spot_check {
        eprintln!("quanv: cos identity spot check, max deviation {dev:.2e}");
        if dev > COS_SPOT_CHECK_TOL {
            return Err(Error::Validation(format!(
                "zero-layer features deviate from cos(pi*pixel) by {dev:.3e}"
            )));
        }
    }
    Ok(QuanvOutcome { index, up_to_date, spot_check, seconds, run })
}

/// Compares up to three cached training records with `cos(scale·pixel)`.
fn cos_spot_check(manifest: &DatasetManifest, index: &CacheIndex, spec: &QuanvFilterSpec) -> Result<f64> {
    let Some(split) = index.split(Split::Train) else { return Ok(0.0) };
    let cache = read_cache(&split.path)?;
    let inputs = manifest
        .split_records(Split::Train)
        .filter(|rec| !index.skipped.iter().any(|(p, _)| p == &rec.path));
    let k = spec.patch_size;
    let mut worst = 0.0f64;
    for (rec, feat) in inputs.zip(&cache.records).take(3) {
        let img = load_preprocessed(Path::new(&rec.path))?;
        let map = &feat.map;
        for y in 0..map.height {
            for x in 0..map.width {
                for c in 0..map.channels {
                    let q = c % spec.n_qubits;
                    let pixel = img.at(y * spec.stride + q / k, x * spec.stride + q % k, 0) as f64;
                    let want = (spec.embed_scale * pixel).cos();
                    worst = worst.max((map.at(y, x, c) as f64 - want).abs());
                }
            }
        }
    }
    Ok(worst)
}

// ------------------------------------------------------------------ data

/// Inputs of one split together with the hash identifying the dataset.
pub struct LoadedSplit {
    pub data: Dataset,
    pub dataset_hash: u64,
    pub class_names: Vec<String>,
    pub skipped: usize,
}

fn input_kind(input: &Path) -> ModelKind {
    if input.is_dir() {
        ModelKind::Quanv
    } else {
        ModelKind::Classical
    }
}

/// Loads one split: preprocessed images from a manifest file, or features
/// from a cache directory.
pub fn load_split(input: &Path, kind: ModelKind, split: Split) -> Result<LoadedSplit> {
    if !input.exists() {
        return Err(Error::Config(format!("input {} does not exist", input.display())));
    }
    if input_kind(input) != kind {
        return Err(Error::Config(match kind {
            ModelKind::Classical => format!("the classical model reads a manifest file; {} is a feature cache directory", input.display()),
            ModelKind::Quanv => format!("the quanv model reads a feature cache directory; {} is a file", input.display()),
        }));
    }
    match kind {
        ModelKind::Classical => {
            let manifest = DatasetManifest::load(input)?;
            let records: Vec<_> = manifest.split_records(split).collect();
            let loaded: Vec<Result<Vec<f32>>> = records
                .par_iter()
                .map(|rec| Ok(load_preprocessed(Path::new(&rec.path))?.values))
                .collect();
            let (mut samples, mut labels, mut skipped) = (Vec::new(), Vec::new(), 0);
            for (rec, res) in records.iter().zip(loaded) {
                match res {
                    Ok(v) => {
                        samples.push(v);
                        labels.push(rec.class_id);
                    }
                    Err(e) => {
                        eprintln!("skipping {}: {e}", rec.path);
                        skipped += 1;
                    }
                }
            }
            let data = Dataset::from_samples([INPUT_SIZE, INPUT_SIZE, 1], samples, labels, manifest.n_classes)?;
            Ok(LoadedSplit {
                data,
                dataset_hash: manifest.content_hash()?,
                class_names: manifest.class_names,
                skipped,
            })
        }
        ModelKind::Quanv => {
            let index = CacheIndex::load(input)?;
            let entry = index
                .split(split)
                .ok_or_else(|| Error::Config(format!("cache {} has no {split} split", input.display())))?;
            let cache = read_cache(&entry.path)?;
            if cache.content_hash != entry.content_hash {
                return Err(Error::Validation(format!(
                    "{} does not match its index; rerun quanv",
                    entry.path.display()
                )));
            }
            let side = INPUT_SIZE / index.spec.stride;
            let shape = [side, side, index.spec.channels()];
            let mut samples = Vec::with_capacity(cache.records.len());
            let mut labels = Vec::with_capacity(cache.records.len());
            for (i, rec) in cache.records.into_iter().enumerate() {
                let m = rec.map;
                if [m.height, m.width, m.channels] != shape {
                    return Err(Error::Config(format!(
                        "cache record {i} is {}x{}x{}, expected {shape:?}",
                        m.height, m.width, m.channels
                    )));
                }
                samples.push(m.values);
                labels.push(rec.label as usize);
            }
            let data = Dataset::from_samples(shape, samples, labels, index.n_classes)?;
            let names = (0..index.n_classes).map(|c| c.to_string()).collect();
            Ok(LoadedSplit { data, dataset_hash: index.manifest_hash, class_names: names, skipped: 0 })
        }
    }
}

// ------------------------------------------------------------------ train

#[derive(Clone, Debug, Default)]
pub struct TrainArgs {
    pub input: Option<PathBuf>,
    pub model: Option<ModelKind>,
    pub batch_size: Option<usize>,
    pub epochs: Option<usize>,
    pub lr: Option<f64>,
    pub out: Option<PathBuf>,
    /// Defaults to `<out>.history.csv`.
    pub history: Option<PathBuf>,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub model_path: PathBuf,
    pub history_path: PathBuf,
    pub history: Vec<EpochStats>,
    pub run: RunConfig,
}

pub fn cmd_train(args: &TrainArgs, global: &Global) -> Result<TrainOutcome> {
    let mut r = Resolver::new("train", global)?;
    let kind = r.setting("model", args.model, None)?;
    let fallback = match kind {
        ModelKind::Classical => ["input", "manifest"],
        ModelKind::Quanv => ["input", "cache_dir"],
    };
    let input = r.path("input", args.input.clone(), &fallback, None)?;
    let defaults = TrainConfig::default();
    let batch_size = r.setting("batch_size", args.batch_size, Some(defaults.batch_size))?;
    let epochs = r.setting("epochs", args.epochs, Some(defaults.epochs))?;
    let lr = r.setting("lr", args.lr, Some(defaults.learning_rate))?;
    let out = r.path("out", args.out.clone(), &["out_model"], Some("model.tsqm"))?;
    let history_path = args.history.clone().unwrap_or_else(|| suffixed(&out, ".history.csv"));
    r.run.paths.set("history", history_path.display());
    let seed = r.seed();

    let train_set = load_split(&input, kind, Split::Train)?;
    let val_set = load_split(&input, kind, Split::Val)?;
    r.run.settings.set("dataset_hash", to_hex(train_set.dataset_hash));
    let run = r.finish();
    let cfg = TrainConfig { batch_size, epochs, learning_rate: lr, seed, ..defaults };
    cfg.validate()?;
    let spec = ModelSpec::standard(train_set.data.sample_shape(), train_set.data.n_classes);
    eprintln!(
        "train: {kind} model, {} train / {} val samples of {:?}, batch {batch_size}, {epochs} epochs",
        train_set.data.len(),
        val_set.data.len(),
        spec.input
    );

    ensure_parent(&out)?;
    let _lock = LockGuard::acquire(&out)?;
    let val = (!val_set.data.is_empty()).then_some(&val_set.data);
    let (model, history) = train_with_progress(&spec, &train_set.data, val, &cfg, |h| {
        eprintln!(
            "train: epoch {:>3}  loss {:.4}  acc {:.4}  val_loss {}  val_acc {}",
            h.epoch,
            h.train_loss,
            h.train_acc,
            h.val_loss.map_or("-".into(), |v| format!("{v:.4}")),
            h.val_acc.map_or("-".into(), |v| format!("{v:.4}")),
        )
    })?;
    let file = ModelFile { run_hash: run.hash(), dataset_hash: train_set.dataset_hash, model };
    save_model(&out, &file)?;
    write_history_csv(&history_path, &history)?;
    run.write_sidecar(&out)?;
    if let Some(last) = history.last() {
        eprintln!(
            "train: final train accuracy {:.4}, val accuracy {}",
            last.train_acc,
            last.val_acc.map_or("-".into(), |v| format!("{v:.4}"))
        );
    }
    Ok(TrainOutcome { model_path: out, history_path, history, run })
}

// ------------------------------------------------------------------- eval

#[derive(Clone, Debug, Default)]
pub struct EvalArgs {
    pub model_file: Option<PathBuf>,
    pub input: Option<PathBuf>,
    pub split: Option<Split>,
    pub out_report: Option<PathBuf>,
    pub beta: Option<f64>,
    /// Recorded in the report; read from the model's sidecar when absent.
    pub batch_size: Option<usize>,
}

/// Full evaluation report, serialized as JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model: ModelKind,
    pub batch_size: usize,
    pub split: String,
    pub n_classes: usize,
    pub class_names: Vec<String>,
    pub run_hash: String,
    pub model_run_hash: String,
    pub dataset_hash: String,
    pub metrics: MetricsReport,
    pub confusion_matrix: ConfusionMatrix,
}

impl EvalReport {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).at(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn summary_csv(&self) -> String {
        format!("{SUMMARY_HEADER}\n{}\n", summary_row(self.model.as_str(), self.batch_size, &self.metrics))
    }
}

#[derive(Clone, Debug)]
pub struct EvalOutcome {
    pub report: EvalReport,
    pub json_path: PathBuf,
    pub csv_path: PathBuf,
    pub run: RunConfig,
}

pub fn cmd_eval(args: &EvalArgs, global: &Global) -> Result<EvalOutcome> {
    let mut r = Resolver::new("eval", global)?;
    let model_path = r.path("model_file", args.model_file.clone(), &["model_file", "out_model"], None)?;
    let sidecar = KeyValues::load(&RunConfig::sidecar_path(&model_path)).ok();
    let from_sidecar = |key: &str| sidecar.as_ref().and_then(|kv| kv.get(key).map(str::to_owned));
    let kind: ModelKind = match from_sidecar("model") {
        Some(k) => k.parse()?,
        None => args.input.as_deref().map(input_kind).unwrap_or(ModelKind::Classical),
    };
    let fallback = match kind {
        ModelKind::Classical => ["input", "manifest"],
        ModelKind::Quanv => ["input", "cache_dir"],
    };
    let input = r.path("input", args.input.clone(), &fallback, None)?;
    r.run.settings.set("model", kind);
    let split = r.setting("split", args.split.map(|s| s.to_string()), Some("test".into()))?;
    let split: Split = split.parse()?;
    let beta = r.setting("beta", args.beta, Some(1.0f64))?;
    let batch_default = from_sidecar("batch_size").and_then(|b| b.parse().ok());
    let batch_size = r.setting("batch_size", args.batch_size, batch_default)?;
    let out = r.path("out_report", args.out_report.clone(), &["out_report"], Some("report.json"))?;

    let file = load_model(&model_path)?;
    r.run.settings.set("model_file_hash", to_hex(hash_bytes(fs::read(&model_path).at(&model_path)?)));
    let loaded = load_split(&input, kind, split)?;
    r.run.settings.set("dataset_hash", to_hex(loaded.dataset_hash));
    let run = r.finish();
    let spec = &file.model.spec;
    if loaded.data.n_classes != spec.n_classes {
        return Err(Error::Config(format!(
            "model predicts {} classes but the data has {}",
            spec.n_classes, loaded.data.n_classes
        )));
    }
    if loaded.data.sample_shape() != spec.input {
        return Err(Error::Config(format!(
            "model input {:?} does not match data samples {:?}",
            spec.input,
            loaded.data.sample_shape()
        )));
    }
    if loaded.data.is_empty() {
        return Err(Error::Validation(format!("{split} split is empty")));
    }
    let pred = predict(&file.model, &loaded.data.inputs)?;
    let cm = confusion_matrix(&loaded.data.labels, &pred, spec.n_classes)?;
    let metrics = macro_metrics(&cm, beta)?;
    let report = EvalReport {
        model: kind,
        batch_size,
        split: split.to_string(),
        n_classes: spec.n_classes,
        class_names: loaded.class_names,
        run_hash: to_hex(run.hash()),
        model_run_hash: to_hex(file.run_hash),
        dataset_hash: to_hex(loaded.dataset_hash),
        metrics,
        confusion_matrix: cm,
    };
    ensure_parent(&out)?;
    let _lock = LockGuard::acquire(&out)?;
    let json = serde_json::to_string_pretty(&report)? + "\n";
    fs::write(&out, json).at(&out)?;
    let csv_path = out.with_extension("csv");
    fs::write(&csv_path, report.summary_csv()).at(&csv_path)?;
    run.write_sidecar(&out)?;
    eprintln!(
        "eval: {kind} on {split}: accuracy {:.4}, precision {:.4}, recall {:.4}, f{} {:.4}",
        report.metrics.accuracy, report.metrics.macro_precision, report.metrics.macro_recall, beta, report.metrics.macro_fbeta
    );
    for p in &report.metrics.top_confused_pairs {
        eprintln!("eval: confused {} -> {} x{}", p.true_class, p.predicted, p.count);
    }
    Ok(EvalOutcome { report, json_path: out, csv_path, run })
}

// ----------------------------------------------------------------- report

#[derive(Clone, Debug, Default)]
pub struct ReportArgs {
    pub reports: Vec<PathBuf>,
    /// Table CSV; an aligned text copy goes next to it with `.txt`.
    pub out: Option<PathBuf>,
}

/// One row per batch size with `(classical, quanv)` cells per metric.
#[derive(Clone, Debug, PartialEq)]
pub struct ReportTable {
    pub rows: Vec<(usize, [[Option<f64>; 2]; 4])>,
}

pub const TABLE_METRICS: [&str; 4] = ["accuracy", "precision", "recall", "fbeta"];

impl ReportTable {
    fn cell(v: Option<f64>) -> String {
        v.map_or("-".into(), |v| format!("{v:.4}"))
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("batch_size");
        for m in TABLE_METRICS {
            out.push_str(&format!(",{m}_cnn,{m}_qnn"));
        }
        out.push('\n');
        for (batch, cells) in &self.rows {
            out.push_str(&batch.to_string());
            for pair in cells {
                for v in pair {
                    out.push(',');
                    out.push_str(&Self::cell(*v));
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut lines = vec![{
            let mut h = format!("{:>10}", "");
            for m in TABLE_METRICS {
                h.push_str(&format!(" | {:^17}", m));
            }
            h
        }];
        let mut sub = format!("{:>10}", "batch");
        for _ in TABLE_METRICS {
            sub.push_str(&format!(" | {:>8} {:>8}", "CNN", "QNN"));
        }
        lines.push(sub);
        lines.push("-".repeat(lines[1].len()));
        for (batch, cells) in &self.rows {
            let mut l = format!("{batch:>10}");
            for [c, q] in cells {
                l.push_str(&format!(" | {:>8} {:>8}", Self::cell(*c), Self::cell(*q)));
            }
            lines.push(l);
        }
        lines.join("\n") + "\n"
    }
}

#[derive(Clone, Debug)]
pub struct ReportOutcome {
    pub table: ReportTable,
    pub csv_path: PathBuf,
    pub text_path: PathBuf,
}

pub fn build_table(reports: &[EvalReport]) -> Result<ReportTable> {
    let first = reports
        .first()
        .ok_or_else(|| Error::Validation("no reports to consolidate".into()))?;
    let mut rows: Vec<(usize, [[Option<f64>; 2]; 4])> = Vec::new();
    for rep in reports {
        if rep.n_classes != first.n_classes {
            return Err(Error::Validation(format!(
                "reports disagree on class count ({} vs {})",
                first.n_classes, rep.n_classes
            )));
        }
        if rep.dataset_hash != first.dataset_hash {
            return Err(Error::Validation(format!(
                "reports come from different datasets ({} vs {})",
                first.dataset_hash, rep.dataset_hash
            )));
        }
        let col = match rep.model {
            ModelKind::Classical => 0,
            ModelKind::Quanv => 1,
        };
        let idx = match rows.iter().position(|(b, _)| *b == rep.batch_size) {
            Some(i) => i,
            None => {
                rows.push((rep.batch_size, [[None; 2]; 4]));
                rows.len() - 1
            }
        };
        let cells = &mut rows[idx].1;
        if cells[0][col].is_some() {
            return Err(Error::Validation(format!(
                "duplicate report for {} at batch size {}",
                rep.model, rep.batch_size
            )));
        }
        let m = &rep.metrics;
        for (k, v) in [m.accuracy, m.macro_precision, m.macro_recall, m.macro_fbeta].into_iter().enumerate() {
            cells[k][col] = Some(v);
        }
    }
    rows.sort_by_key(|r| r.0);
    Ok(ReportTable { rows })
}

pub fn cmd_report(args: &ReportArgs, _global: &Global) -> Result<ReportOutcome> {
    let reports = args.reports.iter().map(|p| EvalReport::load(p)).collect::<Result<Vec<_>>>()?;
    let table = build_table(&reports)?;
    let csv_path = args.out.clone().unwrap_or_else(|| PathBuf::from("table.csv"));
    let text_path = csv_path.with_extension("txt");
    ensure_parent(&csv_path)?;
    let _lock = LockGuard::acquire(&csv_path)?;
    fs::write(&csv_path, table.to_csv()).at(&csv_path)?;
    fs::write(&text_path, table.to_text()).at(&text_path)?;
    Ok(ReportOutcome { table, csv_path, text_path })
}

// ------------------------------------------------------------------ synth

#[derive(Clone, Debug, Default)]
pub struct SynthArgs {
    pub out: Option<PathBuf>,
    pub n_classes: Option<usize>,
    pub per_class: Option<usize>,
    pub min_side: Option<usize>,
    pub max_side: Option<usize>,
}

pub fn cmd_synth(args: &SynthArgs, global: &Global) -> Result<Vec<PathBuf>> {
    let mut r = Resolver::new("synth", global)?;
    let d = SynthConfig::default();
    let out = r.path("out", args.out.clone(), &["root"], None)?;
    let cfg = SynthConfig {
        n_classes: r.setting("n_classes", args.n_classes, Some(d.n_classes))?,
        per_class: r.setting("per_class", args.per_class, Some(d.per_class))?,
        min_side: r.setting("min_side", args.min_side, Some(d.min_side))?,
        max_side: r.setting("max_side", args.max_side, Some(d.max_side))?,
        seed: r.seed(),
    };
    let written = generate_dataset(&out, &cfg)?;
    eprintln!("synth: wrote {} images under {}", written.len(), out.display());
    Ok(written)
}
