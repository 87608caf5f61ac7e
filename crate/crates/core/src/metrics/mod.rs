// SPDX-License-Identifier: Apache-2.0

//! Confusion accumulation and the F1 family: binary, macro, micro, weighted,
//! fold-averaged macro (the biased one), UAR and accuracy.
//!
//! Scores are computed from counts pooled over all folds unless the name says
//! otherwise.

mod confusion;
mod f1;
mod table;

pub use confusion::{accumulate, ClassCounts, ConfusionCounts};
pub use f1::{
    accuracy, f1_binary, f1_harmonic, f1_macro, f1_macro_folds, f1_micro, f1_weighted, per_class_f1, uar, Uar,
};
pub use table::{percent_1dp, MetricName, MetricTable, MetricValue, Scope, FOLD_AVERAGE_WARNING};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("no folds to accumulate")]
    NoFolds,
    #[error("class sets differ between confusion counts")]
    ClassMismatch,
    #[error("shape: {0}")]
    Shape(String),
}
