// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{AuCode, DataError};

/// Independent AU codings of one sample by two annotators.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DualAnnotation {
    pub sample_id: String,
    pub coder1_aus: BTreeSet<AuCode>,
    pub coder2_aus: BTreeSet<AuCode>,
}

impl DualAnnotation {
    /// Agreement for this sample: twice the shared AUs over the total number
    /// of AUs coded by both annotators (`|C1| + |C2|`).
    pub fn agreement(&self) -> Result<f64, DataError> {
        let total = self.coder1_aus.len() + self.coder2_aus.len();
        if total == 0 {
            return Err(DataError::EmptyCoding(self.sample_id.clone()));
        }
        let shared = self.coder1_aus.intersection(&self.coder2_aus).count();
        Ok(2.0 * shared as f64 / total as f64)
    }
}

/// Mean per-sample inter-coder agreement, in `[0, 1]`.
pub fn reliability(annotations: &[DualAnnotation]) -> Result<f64, DataError> {
    if annotations.is_empty() {
        return Err(DataError::EmptyCoding("<no annotations>".into()));
    }
    let mut sum = 0.0;
    for a in annotations {
        sum += a.agreement()?;
    }
    Ok(sum / annotations.len() as f64)
}
