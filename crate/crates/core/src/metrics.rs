//! Confusion matrix, macro precision/recall/F-beta and the most frequent
//! misclassification pairs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Counts indexed `[true][predicted]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub n_classes: usize,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(n_classes: usize) -> Self {
        ConfusionMatrix { n_classes, counts: vec![vec![0; n_classes]; n_classes] }
    }

    pub fn from_labels(truth: &[usize], pred: &[usize], n_classes: usize) -> Result<Self> {
        if truth.len() != pred.len() {
            return Err(Error::Validation(format!(
                "{} true labels but {} predictions",
                truth.len(),
                pred.len()
            )));
        }
        let mut cm = ConfusionMatrix::new(n_classes);
        for (i, (&t, &p)) in truth.iter().zip(pred).enumerate() {
            if t >= n_classes || p >= n_classes {
                return Err(Error::Validation(format!(
                    "sample {i}: label pair ({t}, {p}) out of range for {n_classes} classes"
                )));
            }
            cm.counts[t][p] += 1;
        }
        Ok(cm)
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.n_classes).map(|c| self.counts[c][c]).sum()
    }

    pub fn row_sums(&self) -> Vec<u64> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<u64> {
        (0..self.n_classes).map(|c| self.counts.iter().map(|r| r[c]).sum()).collect()
    }
}

pub fn confusion_matrix(truth: &[usize], pred: &[usize], n_classes: usize) -> Result<ConfusionMatrix> {
    ConfusionMatrix::from_labels(truth, pred, n_classes)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: usize,
    pub support: u64,
    pub predicted: u64,
    pub precision: f64,
    pub recall: f64,
    pub fbeta: f64,
    /// Set when a zero denominator forced precision or recall to 0.
    pub undefined: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusedPair {
    pub true_class: usize,
    pub predicted: usize,
    pub count: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub beta: f64,
    pub total: u64,
    pub accuracy: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_fbeta: f64,
    pub per_class: Vec<ClassMetrics>,
    pub top_confused_pairs: Vec<ConfusedPair>,
}

pub fn fbeta(precision: f64, recall: f64, beta: f64) -> f64 {
    let b2 = beta * beta;
    let denom = b2 * precision + recall;
    if denom == 0.0 {
        0.0
    } else {
        (1.0 + b2) * precision * recall / denom
    }
}

/// Macro-averaged metrics over the classes that occur in the true labels.
/// Zero denominators give 0 and flag the class.
pub fn macro_metrics(cm: &ConfusionMatrix, beta: f64) -> Result<MetricsReport> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::Validation(format!("beta must be positive, got {beta}")));
    }
    let total = cm.total();
    if total == 0 {
        return Err(Error::Validation("confusion matrix is empty".into()));
    }
    let rows = cm.row_sums();
    let cols = cm.col_sums();
    let per_class: Vec<ClassMetrics> = (0..cm.n_classes)
        .map(|c| {
            let tp = cm.counts[c][c] as f64;
            let precision = if cols[c] == 0 { 0.0 } else { tp / cols[c] as f64 };
            let recall = if rows[c] == 0 { 0.0 } else { tp / rows[c] as f64 };
            ClassMetrics {
                class: c,
                support: rows[c],
                predicted: cols[c],
                precision,
                recall,
                fbeta: fbeta(precision, recall, beta),
                undefined: rows[c] == 0 || cols[c] == 0,
            }
        })
        .collect();
    let present: Vec<&ClassMetrics> = per_class.iter().filter(|m| m.support > 0).collect();
    let mean = |f: fn(&ClassMetrics) -> f64| present.iter().map(|m| f(m)).sum::<f64>() / present.len() as f64;
    Ok(MetricsReport {
        beta,
        total,
        accuracy: cm.trace() as f64 / total as f64,
        macro_precision: mean(|m| m.precision),
        macro_recall: mean(|m| m.recall),
        macro_fbeta: mean(|m| m.fbeta),
        per_class,
        top_confused_pairs: top_confused_pairs(cm, 10),
    })
}

/// Off-diagonal cells by count descending, ties by `(true, predicted)`.
pub fn top_confused_pairs(cm: &ConfusionMatrix, k: usize) -> Vec<ConfusedPair> {
    let mut pairs: Vec<ConfusedPair> = cm
        .counts
        .iter()
        .enumerate()
        .flat_map(|(t, row)| {
            row.iter().enumerate().filter(move |&(p, &n)| p != t && n > 0).map(move |(p, &n)| ConfusedPair {
                true_class: t,
                predicted: p,
                count: n,
            })
        })
        .collect();
    pairs.sort_by(|a, b| {
        b.count
            .cmp(&a.count)
            .then(a.true_class.cmp(&b.true_class))
            .then(a.predicted.cmp(&b.predicted))
    });
    pairs.truncate(k);
    pairs
}

pub const SUMMARY_HEADER: &str = "model,batch_size,accuracy,precision,recall,fbeta";

/// One summary CSV row matching [`SUMMARY_HEADER`].
pub fn summary_row(model: &str, batch_size: usize, r: &MetricsReport) -> String {
    format!(
        "{model},{batch_size},{:.6},{:.6},{:.6},{:.6}",
        r.accuracy, r.macro_precision, r.macro_recall, r.macro_fbeta
    )
}
