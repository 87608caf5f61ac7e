// SPDX-License-Identifier: Apache-2.0

//! AU vocabulary, multi-hot label encoding and objective-class maps.

mod matrix;
mod objective;
mod vocab;

pub use matrix::{encode_labels, CoverageReport, LabelMatrix};
pub use objective::{map_objective, ObjectiveMap, ObjectiveRule};
pub use vocab::{select_aus, select_cd6me_aus, AuVocabulary, CD6ME_AUS, CD6ME_MIN_TOTAL};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LabelError {
    #[error("duplicate AU {0} in vocabulary")]
    DuplicateAu(String),
    #[error("vocabulary is empty")]
    EmptyVocabulary,
    #[error("unknown objective class {0:?}")]
    UnknownClass(String),
    #[error("rule file: {0}")]
    RuleFile(String),
    #[error("label shape: {0}")]
    Shape(String),
}
