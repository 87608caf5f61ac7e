// SPDX-License-Identifier: Apache-2.0

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{AuCode, DataError, DatasetId, DatasetTable};

/// An AU needs at least this many instances to count as well represented.
pub const WELL_REPRESENTED_MIN: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub dataset_id: DatasetId,
    pub n_samples: usize,
    pub n_subjects: usize,
    /// Sum over samples of the AU-set size.
    pub n_au_sequences: usize,
    /// Mean number of AUs per sample.
    pub cardinality: f64,
    pub n_distinct_aus: usize,
    pub n_aus_geq10: usize,
    pub n_emotion_classes: usize,
    pub au_counts: BTreeMap<AuCode, usize>,
}

impl DatasetStats {
    /// One-line summary with cardinality at two decimals.
    pub fn summary_line(&self) -> String {
        format!(
            "samples {}, subjects {}, AU sequences {}, cardinality {:.2}",
            self.n_samples, self.n_subjects, self.n_au_sequences, self.cardinality
        )
    }
}

pub fn compute_stats(table: &DatasetTable) -> Result<DatasetStats, DataError> {
    if table.is_empty() {
        return Err(DataError::EmptyTable(table.dataset_id().to_string()));
    }
    let mut au_counts: BTreeMap<AuCode, usize> = BTreeMap::new();
    let mut emotions = BTreeSet::new();
    let mut n_au_sequences = 0;
    for s in table.samples() {
        n_au_sequences += s.au_set.len();
        for &au in &s.au_set {
            *au_counts.entry(au).or_default() += 1;
        }
        if let Some(e) = &s.emotion {
            emotions.insert(e.as_str());
        }
    }
    let n_samples = table.len();
    Ok(DatasetStats {
        dataset_id: table.dataset_id().clone(),
        n_samples,
        n_subjects: table.subjects().len(),
        n_au_sequences,
        cardinality: n_au_sequences as f64 / n_samples as f64,
        n_distinct_aus: au_counts.len(),
        n_aus_geq10: au_counts.values().filter(|&&c| c >= WELL_REPRESENTED_MIN).count(),
        n_emotion_classes: emotions.len(),
        au_counts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Sample;

    fn table(sets: &[&[u16]]) -> DatasetTable {
        let samples = sets
            .iter()
            .enumerate()
            .map(|(i, aus)| {
                let aus = aus.iter().map(|&n| AuCode::new(n).unwrap());
                Sample::new(format!("x{i}"), DatasetId::Casme, format!("s{}", i % 3), 0, 1, Some(2), aus)
                    .unwrap()
            })
            .collect();
        DatasetTable::new(DatasetId::Casme, samples).unwrap()
    }

    #[test]
    fn single_sample() {
        let s = compute_stats(&table(&[&[1]])).unwrap();
        assert_eq!(s.cardinality, 1.0);
        assert_eq!(s.n_aus_geq10, 0);
        assert_eq!(s.n_distinct_aus, 1);
    }

    #[test]
    fn threshold_boundary() {
        let sets: Vec<&[u16]> = vec![&[4]; 10];
        let s = compute_stats(&table(&sets)).unwrap();
        assert_eq!(s.n_aus_geq10, 1);
        let sets: Vec<&[u16]> = vec![&[4]; 9];
        assert_eq!(compute_stats(&table(&sets)).unwrap().n_aus_geq10, 0);
    }

    #[test]
    fn counts_and_subjects() {
        let s = compute_stats(&table(&[&[1, 2], &[4], &[], &[1]])).unwrap();
        assert_eq!(s.n_samples, 4);
        assert_eq!(s.n_subjects, 3);
        assert_eq!(s.n_au_sequences, 4);
        assert_eq!(s.au_counts[&AuCode::new(1).unwrap()], 2);
        assert_eq!(s.summary_line(), "samples 4, subjects 3, AU sequences 4, cardinality 1.00");
    }

    #[test]
    fn empty_table_errors() {
        let t = DatasetTable::new(DatasetId::Samm, vec![]).unwrap();
        assert!(matches!(compute_stats(&t), Err(DataError::EmptyTable(_))));
    }
}
