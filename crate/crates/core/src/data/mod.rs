// SPDX-License-Identifier: Apache-2.0

//! Sample model, annotation ingestion, dataset statistics, inter-coder
//! reliability and synthetic corpora.

mod au;
mod reliability;
mod sample;
pub mod schema;
mod stats;
pub mod synthetic;
pub mod table_io;

pub use au::{parse_au_list, AuCode};
pub use reliability::{reliability, DualAnnotation};
pub use sample::{au_set_key, concat_samples, DatasetId, DatasetTable, Sample, SampleFlags};
pub use schema::{parse_annotations, Schema, SchemaRegistry};
pub use stats::{compute_stats, DatasetStats, WELL_REPRESENTED_MIN};
pub use synthetic::{generate_synthetic, EmotionRule, SyntheticDataset, SyntheticSpec};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("invalid action unit {0:?}")]
    InvalidAu(String),
    #[error("unknown dataset id {0:?}")]
    UnknownDataset(String),
    #[error("unknown schema id {0:?}")]
    UnknownSchema(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("schema {schema}: column {column:?} not found in header")]
    MissingColumn { schema: String, column: String },
    #[error("row {row}: unparsable {field} frame index {value:?}")]
    BadFrame { row: usize, field: &'static str, value: String },
    #[error("row {row}: empty subject id")]
    EmptySubjectRow { row: usize },
    #[error("row {row}: {source}")]
    Row { row: usize, source: Box<DataError> },
    #[error("sample {sample_id}: empty subject id")]
    EmptySubject { sample_id: String },
    #[error("sample {sample_id}: non-monotone temporal landmarks (onset {onset}, apex {apex}, offset {offset})")]
    NonMonotoneLandmarks { sample_id: String, onset: u32, apex: u32, offset: u32 },
    #[error("duplicate sample id {0:?}")]
    DuplicateSampleId(String),
    #[error("sample {sample_id} belongs to {found}, table is {expected}")]
    DatasetMismatch { sample_id: String, expected: String, found: String },
    #[error("table {0} is empty")]
    EmptyTable(String),
    #[error("sample {0}: both coders report no AUs")]
    EmptyCoding(String),
    #[error("infeasible synthetic spec: {0}")]
    InfeasibleSpec(String),
    #[error("csv: {0}")]
    Csv(String),
    #[error("table format: {0}")]
    Format(String),
    #[error("io: {0}")]
    Io(String),
}
