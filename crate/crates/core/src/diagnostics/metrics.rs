//! Precision, recall, F1 and accuracy over stance labels.

use serde::{Deserialize, Serialize};

use crate::corpus::StanceLabel;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub label: StanceLabel,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Gold occurrences.
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub macro_f1: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub accuracy: f64,
    /// Every label, including those absent from gold.
    pub per_class: Vec<ClassMetrics>,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Per-class scores use 0 for empty denominators; macro averages run over
/// the classes that occur in `golds`.
pub fn classification_metrics(preds: &[StanceLabel], golds: &[StanceLabel]) -> Result<Metrics> {
    if preds.len() != golds.len() {
        return Err(Error::DimensionMismatch {
            expected: golds.len(),
            actual: preds.len(),
        });
    }
    if golds.is_empty() {
        return Err(Error::invalid("no predictions to score"));
    }
    let k = StanceLabel::COUNT;
    let (mut tp, mut fp, mut fn_) = (vec![0usize; k], vec![0usize; k], vec![0usize; k]);
    let mut correct = 0;
    for (&p, &g) in preds.iter().zip(golds) {
        if p == g {
            tp[g.index()] += 1;
            correct += 1;
        } else {
            fp[p.index()] += 1;
            fn_[g.index()] += 1;
        }
    }
    let per_class: Vec<ClassMetrics> = StanceLabel::ALL
        .iter()
        .map(|&label| {
            let c = label.index();
            let precision = ratio(tp[c], tp[c] + fp[c]);
            let recall = ratio(tp[c], tp[c] + fn_[c]);
            let f1 = if precision + recall > 0.0 {
                2.0 * precision * recall / (precision + recall)
            } else {
                0.0
            };
            ClassMetrics {
                label,
                precision,
                recall,
                f1,
                support: tp[c] + fn_[c],
            }
        })
        .collect();
    let present: Vec<&ClassMetrics> = per_class.iter().filter(|c| c.support > 0).collect();
    let avg = |f: fn(&ClassMetrics) -> f64| {
        present.iter().map(|c| f(c)).sum::<f64>() / present.len() as f64
    };
    Ok(Metrics {
        macro_f1: avg(|c| c.f1),
        macro_precision: avg(|c| c.precision),
        macro_recall: avg(|c| c.recall),
        accuracy: ratio(correct, golds.len()),
        per_class,
    })
}
