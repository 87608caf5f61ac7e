// SPDX-License-Identifier: Apache-2.0

//! Four ways of aggregating F1 over the same LOSO predictions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ReportTable;
use crate::metrics::{f1_macro, f1_macro_folds, f1_micro, f1_weighted, ConfusionCounts};

/// Scripted single-label LOSO task. Each subject is one fold. In the
/// imbalanced form most subjects contribute one sample and classes follow
/// `class_weights`; the predictor is right with probability `accuracy` and
/// otherwise answers the majority class. In the balanced form every subject
/// contributes one sample of every class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct F1VariantSpec {
    pub n_subjects: usize,
    pub class_weights: Vec<f64>,
    /// Probability that a subject contributes a single sample.
    pub single_sample_rate: f64,
    pub max_samples: usize,
    pub accuracy: f64,
    pub balanced: bool,
    pub seed: u64,
}

impl Default for F1VariantSpec {
    fn default() -> Self {
        F1VariantSpec {
            n_subjects: 60,
            class_weights: vec![0.6, 0.25, 0.15],
            single_sample_rate: 0.7,
            max_samples: 4,
            accuracy: 0.6,
            balanced: false,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct F1Variants {
    pub micro: f64,
    pub weighted: f64,
    pub macro_: f64,
    pub macro_folds: f64,
}

fn draw_class(rng: &mut ChaCha8Rng, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if u < *w {
            return i;
        }
        u -= w;
    }
    weights.len() - 1
}

/// `(predicted, truth)` per fold.
pub fn scripted_folds(spec: &F1VariantSpec) -> Vec<(Vec<usize>, Vec<usize>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let k = spec.class_weights.len();
    let majority = (0..k).fold(0, |b, i| if spec.class_weights[i] > spec.class_weights[b] { i } else { b });
    (0..spec.n_subjects)
        .map(|_| {
            let truth: Vec<usize> = if spec.balanced {
                (0..k).collect()
            } else {
                let n = if rng.random_bool(spec.single_sample_rate) { 1 } else { rng.random_range(2..=spec.max_samples.max(2)) };
                (0..n).map(|_| draw_class(&mut rng, &spec.class_weights)).collect()
            };
            let pred = truth.iter().map(|&t| if rng.random_bool(spec.accuracy) { t } else { majority }).collect();
            (pred, truth)
        })
        .collect()
}

pub fn class_labels(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("class{i}")).collect()
}

pub fn f1_variants(folds: &[(Vec<usize>, Vec<usize>)], labels: &[String]) -> F1Variants {
    let pred: Vec<usize> = folds.iter().flat_map(|f| f.0.iter().copied()).collect();
    let truth: Vec<usize> = folds.iter().flat_map(|f| f.1.iter().copied()).collect();
    let pooled = ConfusionCounts::from_multiclass(&pred, &truth, labels.to_vec()).expect("equal lengths");
    F1Variants {
        micro: f1_micro(&pooled),
        weighted: f1_weighted(&pooled),
        macro_: f1_macro(&pooled),
        macro_folds: f1_macro_folds(folds, labels).expect("at least one fold"),
    }
}

/// Bar table of the four aggregations with ordering notes, plus an SVG
/// rendering of it.
pub fn study_f1_variants(spec: &F1VariantSpec) -> (ReportTable, F1Variants, String) {
    let labels = class_labels(spec.class_weights.len());
    let v = f1_variants(&scripted_folds(spec), &labels);
    let mut t = ReportTable::new(
        "f1-variants",
        "F1 computed four ways on identical predictions",
        "F1",
        vec!["f1_micro".into(), "f1_weighted".into(), "f1_macro".into(), "f1_macro_folds".into()],
    );
    t.rank_by = Some(2);
    let name = if spec.balanced { "balanced" } else { "imbalanced" };
    t.push(name, vec![Some(v.micro), Some(v.weighted), Some(v.macro_), Some(v.macro_folds)]);
    t.notes.push(format!("f1_micro >= f1_macro: {}", v.micro >= v.macro_));
    t.notes.push(format!("f1_macro_folds <= f1_macro: {}", v.macro_folds <= v.macro_));
    t.notes.push("f1_macro_folds averages per-fold scores and is not comparable across protocols".into());
    let svg = t.to_svg();
    (t, v, svg)
}
