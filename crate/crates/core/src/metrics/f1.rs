// SPDX-License-Identifier: Apache-2.0

use serde::{Deserialize, Serialize};

use super::{ClassCounts, ConfusionCounts, MetricError};

/// `2TP / (2TP + FP + FN)`; 0 when the denominator is 0.
pub fn f1_binary(c: &ClassCounts) -> f64 {
    let denom = 2 * c.tp + c.fp + c.fn_;
    if denom == 0 {
        return 0.0;
    }
    (2 * c.tp) as f64 / denom as f64
}

/// Harmonic mean of precision and recall; `None` when `Pr + Re == 0` or
/// either ratio is undefined.
pub fn f1_harmonic(c: &ClassCounts) -> Option<f64> {
    if c.tp + c.fp == 0 || c.tp + c.fn_ == 0 {
        return None;
    }
    let pr = c.tp as f64 / (c.tp + c.fp) as f64;
    let re = c.tp as f64 / (c.tp + c.fn_) as f64;
    if pr + re == 0.0 {
        return None;
    }
    Some(2.0 * pr * re / (pr + re))
}

pub fn per_class_f1(c: &ConfusionCounts) -> Vec<f64> {
    c.classes().iter().map(f1_binary).collect()
}

/// Unweighted mean of per-class F1 (per-class ratio first, then average).
pub fn f1_macro(c: &ConfusionCounts) -> f64 {
    let f = per_class_f1(c);
    if f.is_empty() {
        return 0.0;
    }
    f.iter().sum::<f64>() / f.len() as f64
}

/// F1 of the counts pooled over all classes.
pub fn f1_micro(c: &ConfusionCounts) -> f64 {
    let mut pooled = ClassCounts::default();
    for &k in c.classes() {
        pooled += k;
    }
    f1_binary(&pooled)
}

/// Per-class F1 weighted by class support (`TP + FN`).
pub fn f1_weighted(c: &ConfusionCounts) -> f64 {
    let total: u64 = c.classes().iter().map(ClassCounts::support).sum();
    if total == 0 {
        return 0.0;
    }
    c.classes().iter().map(|k| k.support() as f64 * f1_binary(k)).sum::<f64>() / total as f64
}

/// Accuracy of a single-label problem encoded one-vs-rest.
pub fn accuracy(c: &ConfusionCounts) -> f64 {
    let n = c.n_predictions();
    if n == 0 {
        return 0.0;
    }
    c.classes().iter().map(|k| k.tp).sum::<u64>() as f64 / n as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Uar {
    pub value: f64,
    /// Classes without any true instance; each contributed 0 to the mean.
    pub unsupported: Vec<usize>,
}

/// Unweighted average recall.
pub fn uar(c: &ConfusionCounts) -> Uar {
    let mut unsupported = Vec::new();
    let mut sum = 0.0;
    for (i, k) in c.classes().iter().enumerate() {
        if k.support() == 0 {
            unsupported.push(i);
        } else {
            sum += k.tp as f64 / k.support() as f64;
        }
    }
    let n = c.n_classes().max(1);
    Uar { value: sum / n as f64, unsupported }
}

/// Macro F1 computed separately inside each fold and then averaged.
///
/// Every fold is scored over the full `labels` class set, so classes absent
/// from a fold count as 0. This aggregation is biased low and exists to
/// demonstrate the bias; never rank methods by it.
pub fn f1_macro_folds(per_fold: &[(Vec<usize>, Vec<usize>)], labels: &[String]) -> Result<f64, MetricError> {
    if per_fold.is_empty() {
        return Err(MetricError::NoFolds);
    }
    let mut sum = 0.0;
    for (pred, truth) in per_fold {
        sum += f1_macro(&ConfusionCounts::from_multiclass(pred, truth, labels.to_vec())?);
    }
    Ok(sum / per_fold.len() as f64)
}
