// SPDX-License-Identifier: Apache-2.0

//! Model inputs: frame windows, Horn–Schunck flow with optical strain, the
//! `MEBF` feature store and a synthetic descriptor generator.

mod flow;
mod image;
mod store;
mod synth;
mod window;

pub use flow::{compute_flow, compute_strain, flow_features, pair_features, FlowField, FlowParams};
pub use image::{encode_pgm, parse_pgm, read_pgm, read_raw, resize_area, GrayImage};
pub use store::{encode_features, write_features, FeatureLayout, FeatureRecord, FeatureStore, MAGIC, VERSION};
pub use synth::{derive_seed, synthesize_features, synthesize_records, SyntheticFeatureSpec};
pub use window::{select_window, FrameWindow, WindowMode, WindowRule};

/// Side length of the resized flow channels fed to models.
pub const FLOW_SIDE: usize = 28;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("sample {0}: onset, apex and offset coincide")]
    DegenerateClip(String),
    #[error("shape: {0}")]
    Shape(String),
    #[error("parameters: {0}")]
    Params(String),
    #[error("image: {0}")]
    Image(String),
    #[error("feature file checksum mismatch (truncated or corrupted)")]
    Checksum,
    #[error("unknown feature file version {0}")]
    UnknownVersion(u16),
    #[error("feature file: {0}")]
    Format(String),
    #[error("no features for sample {0}")]
    NotFound(String),
    #[error("duplicate sample id {0}")]
    Duplicate(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
