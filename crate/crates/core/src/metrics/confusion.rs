// SPDX-License-Identifier: Apache-2.0

use std::ops::AddAssign;

use serde::{Deserialize, Serialize};

use super::MetricError;

/// One-vs-rest counts for a single class (or a single AU).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl ClassCounts {
    pub fn new(tp: u64, fp: u64, fn_: u64, tn: u64) -> Self {
        ClassCounts { tp, fp, fn_, tn }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn support(&self) -> u64 {
        self.tp + self.fn_
    }

    fn record(&mut self, predicted: bool, actual: bool) {
        match (predicted, actual) {
            (true, true) => self.tp += 1,
            (true, false) => self.fp += 1,
            (false, true) => self.fn_ += 1,
            (false, false) => self.tn += 1,
        }
    }
}

impl AddAssign for ClassCounts {
    fn add_assign(&mut self, o: Self) {
        self.tp += o.tp;
        self.fp += o.fp;
        self.fn_ += o.fn_;
        self.tn += o.tn;
    }
}

/// Per-class confusion counts over a fixed, named class set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    labels: Vec<String>,
    classes: Vec<ClassCounts>,
}

impl ConfusionCounts {
    pub fn zeros(labels: Vec<String>) -> Self {
        let classes = vec![ClassCounts::default(); labels.len()];
        ConfusionCounts { labels, classes }
    }

    pub fn from_counts(labels: Vec<String>, classes: Vec<ClassCounts>) -> Result<Self, MetricError> {
        if labels.len() != classes.len() {
            return Err(MetricError::Shape(format!("{} labels for {} classes", labels.len(), classes.len())));
        }
        if let Some(first) = classes.first() {
            if classes.iter().any(|c| c.total() != first.total()) {
                return Err(MetricError::Shape("class totals differ".into()));
            }
        }
        Ok(ConfusionCounts { labels, classes })
    }

    /// Independent binary problems, one per column (multi-label AU output).
    /// `predicted` and `actual` are row-major `n x labels.len()` 0/1 matrices.
    pub fn from_multilabel(predicted: &[u8], actual: &[u8], labels: Vec<String>) -> Result<Self, MetricError> {
        let c = labels.len();
        if c == 0 || predicted.len() != actual.len() || predicted.len() % c != 0 {
            return Err(MetricError::Shape(format!(
                "multi-label shapes: {} predicted, {} actual, {c} columns",
                predicted.len(),
                actual.len()
            )));
        }
        let mut out = ConfusionCounts::zeros(labels);
        for (i, (&p, &a)) in predicted.iter().zip(actual).enumerate() {
            out.classes[i % c].record(p != 0, a != 0);
        }
        Ok(out)
    }

    /// One-vs-rest counts from single-label class ids.
    pub fn from_multiclass(predicted: &[usize], actual: &[usize], labels: Vec<String>) -> Result<Self, MetricError> {
        let c = labels.len();
        if predicted.len() != actual.len() {
            return Err(MetricError::Shape(format!("{} predictions for {} truths", predicted.len(), actual.len())));
        }
        if let Some(&bad) = predicted.iter().chain(actual).find(|&&k| k >= c) {
            return Err(MetricError::Shape(format!("class id {bad} outside {c} classes")));
        }
        let mut out = ConfusionCounts::zeros(labels);
        for (&p, &a) in predicted.iter().zip(actual) {
            for (k, counts) in out.classes.iter_mut().enumerate() {
                counts.record(p == k, a == k);
            }
        }
        Ok(out)
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn classes(&self) -> &[ClassCounts] {
        &self.classes
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn n_predictions(&self) -> u64 {
        self.classes.first().map_or(0, ClassCounts::total)
    }

    pub fn merge(&mut self, other: &ConfusionCounts) -> Result<(), MetricError> {
        if self.labels != other.labels {
            return Err(MetricError::ClassMismatch);
        }
        for (a, &b) in self.classes.iter_mut().zip(&other.classes) {
            *a += b;
        }
        Ok(())
    }
}

/// Elementwise sum of per-fold counts: the pooled confusion over all folds.
pub fn accumulate(folds: &[ConfusionCounts]) -> Result<ConfusionCounts, MetricError> {
    let (first, rest) = folds.split_first().ok_or(MetricError::NoFolds)?;
    let mut total = first.clone();
    for f in rest {
        total.merge(f)?;
    }
    Ok(total)
}
