// SPDX-License-Identifier: Apache-2.0

//! Shallow multi-label models, BCE-with-logits, Adam, the stopping regimes
//! and the per-plan runner.

mod adam;
mod checkpoint;
mod dense;
mod loss;
mod model;
mod run;
mod train;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use checkpoint::{decode_checkpoint, encode_checkpoint, Checkpoint};
pub use dense::Matrix;
pub use loss::{bce_with_logits, hinge, sigmoid, softplus};
pub use model::{argmax_rows, threshold, ModelKind, ModelSpec};
pub use run::{
    read_predictions_csv, run_external, run_protocol, ExternalScores, FoldResult, FoldSummary, PredictionRow,
    Provenance, RunOptions, RunReport, SeedResult, TaskData, REPORT_FORMAT, REPORT_VERSION,
};
pub use train::{
    select_best, stream_seed, task_confusion, task_score, train_fold, EpochRecord, EpochTrace, FoldOutcome, Stopping,
    TaskKind, TestData, TrainConfig, TrainData,
};

use thiserror::Error;

use crate::labels::LabelError;
use crate::metrics::MetricError;
use crate::protocols::ProtocolError;

#[derive(Debug, Error)]
pub enum LearnError {
    #[error("shape: {0}")]
    Shape(String),
    #[error("labels must be 0 or 1, found {0}")]
    NonBinaryLabel(u8),
    #[error("non-finite gradient at parameter {0}")]
    NonFiniteGradient(usize),
    #[error("model spec: {0}")]
    Spec(String),
    #[error("train config: {0}")]
    Config(String),
    #[error("ES_TEST selects epochs on test data and is only available in leak-demo mode (see docs/leakage.md)")]
    LeakRefused,
    #[error("validation split is empty; ES_VALIDATION needs at least two training subjects")]
    EmptyValidation,
    #[error("empty training set")]
    EmptyTraining,
    #[error("plan: {0}")]
    Plan(String),
    #[error("predictions file: {0}")]
    Predictions(String),
    #[error("report: {0}")]
    Report(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Label(#[from] LabelError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
