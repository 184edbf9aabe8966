use std::io::Write;
use std::path::Path;

use super::adam::{adam_step, AdamConfig, AdamState};
use super::model::{Mode, Model, ModelSpec};
use super::ops::softmax_cross_entropy;
use super::tensor::{Scalar, Tensor};
use crate::error::{Error, IoContext, Result};
use crate::rng::{derive_seed, SeededRng};

const EVAL_CHUNK: usize = 64;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub seed: u64,
    pub dropout_active: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let adam = AdamConfig::default();
        TrainConfig {
            batch_size: 16,
            epochs: 50,
            learning_rate: adam.lr,
            adam_beta1: adam.beta1,
            adam_beta2: adam.beta2,
            adam_eps: adam.eps,
            seed: 0,
            dropout_active: true,
        }
    }
}

impl TrainConfig {
    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.learning_rate,
            beta1: self.adam_beta1,
            beta2: self.adam_beta2,
            eps: self.adam_eps,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        self.adam().validate()
    }
}

/// Labelled samples stored as one `N×H×W×C` tensor.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub inputs: Tensor<f32>,
    pub labels: Vec<usize>,
    pub n_classes: usize,
}

impl Dataset {
    pub fn new(inputs: Tensor<f32>, labels: Vec<usize>, n_classes: usize) -> Result<Self> {
        if inputs.shape().len() != 4 || inputs.shape()[0] != labels.len() {
            return Err(Error::Dimension(format!(
                "{} labels for inputs {:?}",
                labels.len(),
                inputs.shape()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= n_classes) {
            return Err(Error::Validation(format!("label {bad} out of range for {n_classes} classes")));
        }
        Ok(Dataset { inputs, labels, n_classes })
    }

    /// Builds the batch tensor from samples `[H, W, C]` each.
    pub fn from_samples(sample_shape: [usize; 3], samples: Vec<Vec<f32>>, labels: Vec<usize>, n_classes: usize) -> Result<Self> {
        let per: usize = sample_shape.iter().product();
        let n = samples.len();
        let mut data = Vec::with_capacity(n * per);
        for (i, s) in samples.into_iter().enumerate() {
            if s.len() != per {
                return Err(Error::Dimension(format!("sample {i} has {} values, expected {per}", s.len())));
            }
            data.extend(s);
        }
        let [h, w, c] = sample_shape;
        Dataset::new(Tensor::new(vec![n, h, w, c], data)?, labels, n_classes)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn sample_shape(&self) -> [usize; 3] {
        let s = self.inputs.shape();
        [s[1], s[2], s[3]]
    }

    fn gather<T: Scalar>(&self, idx: &[usize]) -> (Tensor<T>, Tensor<T>) {
        let [h, w, c] = self.sample_shape();
        let per = h * w * c;
        let mut x = Vec::with_capacity(idx.len() * per);
        let mut y = vec![T::zero(); idx.len() * self.n_classes];
        for (row, &i) in idx.iter().enumerate() {
            x.extend(self.inputs.data()[i * per..(i + 1) * per].iter().map(|&v| T::of(v as f64)));
            y[row * self.n_classes + self.labels[i]] = T::one();
        }
        (
            Tensor::new(vec![idx.len(), h, w, c], x).expect("gathered batch"),
            Tensor::new(vec![idx.len(), self.n_classes], y).expect("one-hot batch"),
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_loss: Option<f64>,
    pub val_acc: Option<f64>,
}

fn argmax_rows<T: Scalar>(logits: &Tensor<T>) -> Vec<usize> {
    let k = logits.shape()[1];
    logits
        .data()
        .chunks_exact(k)
        .map(|row| {
            let mut best = 0;
            for (j, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}

fn check_compatible(spec: &ModelSpec, data: &Dataset, what: &str) -> Result<()> {
    if data.sample_shape() != spec.input || data.n_classes != spec.n_classes {
        return Err(Error::Config(format!(
            "{what} set has samples {:?} and {} classes; model expects {:?} and {}",
            data.sample_shape(),
            data.n_classes,
            spec.input,
            spec.n_classes
        )));
    }
    Ok(())
}

/// Trains a freshly initialized model. Weight init, shuffling and dropout
/// masks draw from separate streams derived from `cfg.seed`. Train loss and
/// accuracy are running means over the epoch's batches (dropout on); the
/// validation numbers come from a separate evaluation pass.
pub fn train(spec: &ModelSpec, train_set: &Dataset, val_set: Option<&Dataset>, cfg: &TrainConfig) -> Result<(Model<f32>, Vec<EpochStats>)> {
    train_with_progress(spec, train_set, val_set, cfg, |_| {})
}

pub fn train_with_progress(
    spec: &ModelSpec,
    train_set: &Dataset,
    val_set: Option<&Dataset>,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochStats),
) -> Result<(Model<f32>, Vec<EpochStats>)> {
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(Error::Validation("training set is empty".into()));
    }
    check_compatible(spec, train_set, "training")?;
    if let Some(v) = val_set {
        check_compatible(spec, v, "validation")?;
    }
    let adam = cfg.adam();
    let mut model: Model<f32> = Model::init(spec.clone(), derive_seed(cfg.seed, 1))?;
    let mut state = AdamState::new(&model.params);
    let mut shuffle_rng = SeededRng::new(derive_seed(cfg.seed, 2));
    let mut dropout_rng = SeededRng::new(derive_seed(cfg.seed, 3));
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        for i in (1..order.len()).rev() {
            order.swap(i, shuffle_rng.below(i + 1));
        }
        let (mut loss_sum, mut correct) = (0.0f64, 0usize);
        for batch in order.chunks(cfg.batch_size) {
            let (x, y) = train_set.gather::<f32>(batch);
            let mode = if cfg.dropout_active { Mode::Train(&mut dropout_rng) } else { Mode::Eval };
            let (loss, grads, logits) = model.loss_and_grads(&x, &y, mode)?;
            if !loss.is_finite() {
                return Err(Error::Validation(format!("non-finite loss at epoch {epoch}")));
            }
            loss_sum += loss as f64 * batch.len() as f64;
            correct += argmax_rows(&logits)
                .iter()
                .zip(batch)
                .filter(|(p, &i)| **p == train_set.labels[i])
                .count();
            adam_step(&mut model.params, &grads, &mut state, &adam)?;
        }
        let n = train_set.len() as f64;
        let (val_loss, val_acc) = match val_set {
            Some(v) if !v.is_empty() => {
                let (l, a) = evaluate(&model, v)?;
                (Some(l), Some(a))
            }
            _ => (None, None),
        };
        let stats = EpochStats {
            epoch,
            train_loss: loss_sum / n,
            train_acc: correct as f64 / n,
            val_loss,
            val_acc,
        };
        on_epoch(&stats);
        history.push(stats);
    }
    Ok((model, history))
}

/// Mean cross-entropy and accuracy in evaluation mode.
pub fn evaluate<T: Scalar>(model: &Model<T>, data: &Dataset) -> Result<(f64, f64)> {
    check_compatible(&model.spec, data, "evaluation")?;
    if data.is_empty() {
        return Err(Error::Validation("evaluation set is empty".into()));
    }
    let idx: Vec<usize> = (0..data.len()).collect();
    let (mut loss_sum, mut correct) = (0.0, 0);
    for chunk in idx.chunks(EVAL_CHUNK) {
        let (x, y) = data.gather::<T>(chunk);
        let logits = model.logits(&x)?;
        let (loss, _) = softmax_cross_entropy(&logits, &y)?;
        loss_sum += loss.f64() * chunk.len() as f64;
        correct += argmax_rows(&logits)
            .iter()
            .zip(chunk)
            .filter(|(p, &i)| **p == data.labels[i])
            .count();
    }
    let n = data.len() as f64;
    Ok((loss_sum / n, correct as f64 / n))
}

/// Predicted class per sample: argmax of the logits, ties to the lower index.
pub fn predict<T: Scalar>(model: &Model<T>, inputs: &Tensor<T>) -> Result<Vec<usize>> {
    let s = inputs.shape();
    if s.len() != 4 {
        return Err(Error::Dimension(format!("predict expects N×H×W×C, got {s:?}")));
    }
    let per: usize = s[1..].iter().product();
    let mut out = Vec::with_capacity(s[0]);
    for chunk in inputs.data().chunks(EVAL_CHUNK * per.max(1)) {
        let n = chunk.len() / per.max(1);
        let x = Tensor::new(vec![n, s[1], s[2], s[3]], chunk.to_vec())?;
        out.extend(argmax_rows(&model.logits(&x)?));
    }
    Ok(out)
}

pub fn write_history_csv(path: &Path, history: &[EpochStats]) -> Result<()> {
    let mut text = String::from("epoch,train_loss,train_acc,val_loss,val_acc\n");
    let opt = |v: Option<f64>| v.map(|v| format!("{v:.6}")).unwrap_or_default();
    for h in history {
        text.push_str(&format!(
            "{},{:.6},{:.6},{},{}\n",
            h.epoch,
            h.train_loss,
            h.train_acc,
            opt(h.val_loss),
            opt(h.val_acc)
        ));
    }
    let mut f = std::fs::File::create(path).at(path)?;
    f.write_all(text.as_bytes()).at(path)
}
