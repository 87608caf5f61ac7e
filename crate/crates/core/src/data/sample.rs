// SPDX-License-Identifier: Apache-2.0

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{AuCode, DataError};

/// Identifier of a source dataset.
///
/// The six CD6ME sources have fixed short codes; generated data uses
/// `synthetic-<name>`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum DatasetId {
    Casme,
    Casme2,
    Casme3,
    FourDme,
    Mmew,
    Samm,
    Synthetic(String),
}

impl DatasetId {
    /// The six CD6ME sources in the column order used by the per-dataset tables.
    pub const CD6ME: [DatasetId; 6] = [
        DatasetId::Casme,
        DatasetId::Casme2,
        DatasetId::Samm,
        DatasetId::FourDme,
        DatasetId::Mmew,
        DatasetId::Casme3,
    ];

    pub fn code(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for DatasetId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DatasetId::Casme => f.write_str("C1"),
            DatasetId::Casme2 => f.write_str("C2"),
            DatasetId::Casme3 => f.write_str("C3"),
            DatasetId::FourDme => f.write_str("4D"),
            DatasetId::Mmew => f.write_str("MM"),
            DatasetId::Samm => f.write_str("SA"),
            DatasetId::Synthetic(name) => write!(f, "synthetic-{name}"),
        }
    }
}

impl FromStr for DatasetId {
    type Err = DataError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let id = match s.trim() {
            "C1" => DatasetId::Casme,
            "C2" => DatasetId::Casme2,
            "C3" => DatasetId::Casme3,
            "4D" => DatasetId::FourDme,
            "MM" => DatasetId::Mmew,
            "SA" => DatasetId::Samm,
            other => match other.strip_prefix("synthetic-") {
                Some(name) if !name.is_empty() => DatasetId::Synthetic(name.to_string()),
                _ => return Err(DataError::UnknownDataset(other.to_string())),
            },
        };
        Ok(id)
    }
}

impl TryFrom<String> for DatasetId {
    type Error = DataError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        value.parse()
    }
}

impl From<DatasetId> for String {
    fn from(id: DatasetId) -> Self {
        id.to_string()
    }
}

/// Annotation quirks detected while normalizing a sample.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleFlags {
    /// Onset and apex were marked as the same frame.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub onset_is_apex: bool,
    /// The offset was missing and was set to the apex.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub offset_imputed: bool,
}

/// One micro-expression clip.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sample {
    pub sample_id: String,
    pub dataset_id: DatasetId,
    pub subject_id: String,
    pub onset: u32,
    pub apex: u32,
    pub offset: u32,
    pub au_set: BTreeSet<AuCode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub emotion: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feature_ref: Option<String>,
    #[serde(default)]
    pub flags: SampleFlags,
}

impl Sample {
    /// Builds a sample, checking `onset <= apex <= offset` and setting the
    /// `onset_is_apex` flag. A missing offset is replaced by the apex.
    pub fn new(
        sample_id: impl Into<String>,
        dataset_id: DatasetId,
        subject_id: impl Into<String>,
        onset: u32,
        apex: u32,
        offset: Option<u32>,
        au_set: impl IntoIterator<Item = AuCode>,
    ) -> Result<Self, DataError> {
        let sample_id = sample_id.into();
        let subject_id = subject_id.into();
        if subject_id.trim().is_empty() {
            return Err(DataError::EmptySubject { sample_id });
        }
        let offset_imputed = offset.is_none();
        let offset = offset.unwrap_or(apex);
        if !(onset <= apex && apex <= offset) {
            return Err(DataError::NonMonotoneLandmarks { sample_id, onset, apex, offset });
        }
        Ok(Sample {
            flags: SampleFlags { onset_is_apex: onset == apex, offset_imputed },
            sample_id,
            dataset_id,
            subject_id,
            onset,
            apex,
            offset,
            au_set: au_set.into_iter().collect(),
            emotion: None,
            feature_ref: None,
        })
    }

    pub fn with_emotion(mut self, emotion: impl Into<String>) -> Self {
        self.emotion = Some(emotion.into());
        self
    }

    /// Subject identity namespaced by dataset: the same raw id in two
    /// datasets denotes two different people.
    pub fn subject_key(&self) -> (DatasetId, String) {
        (self.dataset_id.clone(), self.subject_id.clone())
    }

    /// Canonical key of the AU set, e.g. `"AU1+AU4"`; empty sets map to `"-"`.
    pub fn au_key(&self) -> String {
        au_set_key(&self.au_set)
    }

    pub(crate) fn validate(&self) -> Result<(), DataError> {
        if self.subject_id.trim().is_empty() {
            return Err(DataError::EmptySubject { sample_id: self.sample_id.clone() });
        }
        if !(self.onset <= self.apex && self.apex <= self.offset) {
            return Err(DataError::NonMonotoneLandmarks {
                sample_id: self.sample_id.clone(),
                onset: self.onset,
                apex: self.apex,
                offset: self.offset,
            });
        }
        Ok(())
    }
}

pub fn au_set_key(set: &BTreeSet<AuCode>) -> String {
    if set.is_empty() {
        return "-".to_string();
    }
    set.iter().map(|a| a.to_string()).collect::<Vec<_>>().join("+")
}

/// All samples of one dataset, in file order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetTable {
    dataset_id: DatasetId,
    samples: Vec<Sample>,
}

impl DatasetTable {
    pub fn new(dataset_id: DatasetId, samples: Vec<Sample>) -> Result<Self, DataError> {
        let mut seen = HashSet::with_capacity(samples.len());
        for s in &samples {
            s.validate()?;
            if s.dataset_id != dataset_id {
                return Err(DataError::DatasetMismatch {
                    sample_id: s.sample_id.clone(),
                    expected: dataset_id.to_string(),
                    found: s.dataset_id.to_string(),
                });
            }
            if !seen.insert(s.sample_id.as_str()) {
                return Err(DataError::DuplicateSampleId(s.sample_id.clone()));
            }
        }
        Ok(DatasetTable { dataset_id, samples })
    }

    pub fn dataset_id(&self) -> &DatasetId {
        &self.dataset_id
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Distinct subject ids in order of first appearance.
    pub fn subjects(&self) -> Vec<&str> {
        let mut seen = HashSet::new();
        self.samples
            .iter()
            .filter(|s| seen.insert(s.subject_id.as_str()))
            .map(|s| s.subject_id.as_str())
            .collect()
    }

    pub fn into_samples(self) -> Vec<Sample> {
        self.samples
    }
}

/// Concatenates tables in the given order; indices into the result are the
/// "universe" indices used by fold plans.
pub fn concat_samples<'a>(tables: impl IntoIterator<Item = &'a DatasetTable>) -> Vec<&'a Sample> {
    tables.into_iter().flat_map(|t| t.samples.iter()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn au(n: u16) -> AuCode {
        AuCode::new(n).unwrap()
    }

    #[test]
    fn dataset_codes_round_trip() {
        for id in DatasetId::CD6ME.iter().cloned().chain([DatasetId::Synthetic("x1".into())]) {
            assert_eq!(id.to_string().parse::<DatasetId>().unwrap(), id);
        }
        assert!("SMIC".parse::<DatasetId>().is_err());
        assert!("synthetic-".parse::<DatasetId>().is_err());
    }

    #[test]
    fn landmark_checks() {
        let err = Sample::new("x", DatasetId::Casme2, "s1", 20, 10, Some(30), []).unwrap_err();
        assert!(err.to_string().contains("non-monotone temporal landmarks"));

        let s = Sample::new("x", DatasetId::Casme2, "s1", 10, 10, Some(25), [au(4)]).unwrap();
        assert!(s.flags.onset_is_apex);
        assert!(!s.flags.offset_imputed);

        let s = Sample::new("x", DatasetId::Casme2, "s1", 10, 15, None, [au(4)]).unwrap();
        assert_eq!(s.offset, 15);
        assert!(s.flags.offset_imputed);

        assert!(matches!(
            Sample::new("x", DatasetId::Casme2, " ", 1, 2, Some(3), []),
            Err(DataError::EmptySubject { .. })
        ));
    }

    #[test]
    fn table_invariants() {
        let a = Sample::new("a", DatasetId::Samm, "s1", 0, 1, Some(2), [au(1)]).unwrap();
        let b = Sample::new("a", DatasetId::Samm, "s2", 0, 1, Some(2), [au(2)]).unwrap();
        assert!(matches!(
            DatasetTable::new(DatasetId::Samm, vec![a.clone(), b]),
            Err(DataError::DuplicateSampleId(_))
        ));
        assert!(matches!(
            DatasetTable::new(DatasetId::Casme, vec![a.clone()]),
            Err(DataError::DatasetMismatch { .. })
        ));
        let c = Sample::new("c", DatasetId::Samm, "s1", 0, 1, Some(2), []).unwrap();
        let d = Sample::new("d", DatasetId::Samm, "s0", 0, 1, Some(2), []).unwrap();
        let t = DatasetTable::new(DatasetId::Samm, vec![a, c, d]).unwrap();
        assert_eq!(t.subjects(), vec!["s1", "s0"]);
    }

    #[test]
    fn au_keys() {
        let s = Sample::new("a", DatasetId::Samm, "s1", 0, 1, Some(2), [au(12), au(4)]).unwrap();
        assert_eq!(s.au_key(), "AU4+AU12");
        let e = Sample::new("b", DatasetId::Samm, "s1", 0, 1, Some(2), []).unwrap();
        assert_eq!(e.au_key(), "-");
    }
}
