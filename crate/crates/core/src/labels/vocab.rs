// SPDX-License-Identifier: Apache-2.0

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::LabelError;
use crate::data::{AuCode, DatasetTable};

/// AU numbers of the CD6ME benchmark, in label-column order.
pub const CD6ME_AUS: [u16; 12] = [1, 2, 4, 5, 6, 7, 9, 10, 12, 14, 15, 17];

/// Minimum pooled instance count for an AU to enter the benchmark.
pub const CD6ME_MIN_TOTAL: usize = 50;

/// An ordered, duplicate-free list of AUs fixing the label-column order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "VocabularyFile", into = "VocabularyFile")]
pub struct AuVocabulary {
    name: String,
    aus: Vec<AuCode>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VocabularyFile {
    name: String,
    version: u32,
    aus: Vec<AuCode>,
}

impl TryFrom<VocabularyFile> for AuVocabulary {
    type Error = LabelError;

    fn try_from(f: VocabularyFile) -> Result<Self, Self::Error> {
        if f.version != 1 {
            return Err(LabelError::RuleFile(format!("vocabulary version {} unsupported", f.version)));
        }
        AuVocabulary::new(f.name, f.aus)
    }
}

impl From<AuVocabulary> for VocabularyFile {
    fn from(v: AuVocabulary) -> Self {
        VocabularyFile { name: v.name, version: 1, aus: v.aus }
    }
}

impl AuVocabulary {
    pub fn new(name: impl Into<String>, aus: Vec<AuCode>) -> Result<Self, LabelError> {
        let mut seen = BTreeSet::new();
        if let Some(dup) = aus.iter().find(|a| !seen.insert(**a)) {
            return Err(LabelError::DuplicateAu(dup.to_string()));
        }
        Ok(AuVocabulary { name: name.into(), aus })
    }

    pub fn cd6me() -> Self {
        let aus = CD6ME_AUS.iter().map(|&n| AuCode::new(n).expect("nonzero")).collect();
        AuVocabulary { name: "cd6me".into(), aus }
    }

    pub fn from_toml(text: &str) -> Result<Self, LabelError> {
        toml::from_str(text).map_err(|e| LabelError::RuleFile(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("vocabulary serializes")
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn aus(&self) -> &[AuCode] {
        &self.aus
    }

    pub fn len(&self) -> usize {
        self.aus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.aus.is_empty()
    }

    pub fn index_of(&self, au: AuCode) -> Option<usize> {
        self.aus.iter().position(|&a| a == au)
    }

    /// SHA-256 over the canonical `name:AU1,AU2,...` text, so formatting of
    /// the rule file does not change the digest.
    pub fn checksum(&self) -> String {
        let canon = format!(
            "{}:{}",
            self.name,
            self.aus.iter().map(|a| a.to_string()).collect::<Vec<_>>().join(",")
        );
        hex::encode(Sha256::digest(canon.as_bytes()))
    }
}

/// Selects the benchmark AUs: pooled count at least `min_total` and present
/// (count > 0) in a strict majority of the tables. Returned in numeric order.
pub fn select_cd6me_aus(tables: &[DatasetTable], min_total: usize) -> AuVocabulary {
    select_aus(tables, min_total, tables.len() / 2 + 1)
}

pub fn select_aus(tables: &[DatasetTable], min_total: usize, min_presence: usize) -> AuVocabulary {
    let mut total: BTreeMap<AuCode, usize> = BTreeMap::new();
    let mut presence: BTreeMap<AuCode, usize> = BTreeMap::new();
    for t in tables {
        let mut here = BTreeSet::new();
        for s in t.samples() {
            for &au in &s.au_set {
                *total.entry(au).or_default() += 1;
                here.insert(au);
            }
        }
        for au in here {
            *presence.entry(au).or_default() += 1;
        }
    }
    let aus = total
        .into_iter()
        .filter(|&(au, n)| n >= min_total && presence[&au] >= min_presence)
        .map(|(au, _)| au)
        .collect();
    AuVocabulary { name: "selected".into(), aus }
}
