// SPDX-License-Identifier: Apache-2.0

//! Fold plans and the sealed test set.

mod plan;
mod sealed;

pub use plan::{
    make_holdout, make_holdout_multi, make_lodo, make_loso, make_loso_with_auxiliary, make_pde, subject_key,
    training_cost, validation_split, Fold, FoldPlan, PlanKeys, Protocol,
};
pub use sealed::{AccessEntry, AccessMode, CompletionToken, LeakVerdict, Phase, SealState, SealedTestSet};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("degenerate plan: {0}")]
    Degenerate(String),
    #[error("LODO needs at least 2 tables, got {0}")]
    TooFewTables(usize),
    #[error("dataset {0} appears twice")]
    DuplicateDataset(String),
    #[error("dataset {0} on both sides of a holdout")]
    SameDataset(String),
    #[error("validation split would leave one side empty")]
    EmptyValidation,
    #[error("fold {fold}: test set is sealed, refused '{operation}'")]
    SealedRead { fold: String, operation: String },
    #[error("fold {0}: unseal needs the trainer's completion token")]
    MissingToken(String),
    #[error("completion token for fold {got}, expected {expected}")]
    WrongToken { expected: String, got: String },
    #[error("fold {0}: already unsealed")]
    AlreadyUnsealed(String),
    #[error("invalid plan: {0}")]
    InvalidPlan(String),
}
