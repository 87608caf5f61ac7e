// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{AuVocabulary, LabelError};
use crate::data::{AuCode, Sample};

/// Row-major `n x C` binary AU presence matrix bound to a vocabulary.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelMatrix {
    vocab: AuVocabulary,
    rows: usize,
    data: Vec<u8>,
}

/// AUs that were present in samples but not in the vocabulary.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub dropped: BTreeMap<AuCode, usize>,
    pub samples_without_labels: usize,
}

impl CoverageReport {
    pub fn total_dropped(&self) -> usize {
        self.dropped.values().sum()
    }
}

impl LabelMatrix {
    pub fn from_rows(vocab: AuVocabulary, rows: Vec<Vec<u8>>) -> Result<Self, LabelError> {
        let cols = vocab.len();
        let n = rows.len();
        let mut data = Vec::with_capacity(n * cols);
        for (i, r) in rows.into_iter().enumerate() {
            if r.len() != cols {
                return Err(LabelError::Shape(format!("row {i} has {} columns, expected {cols}", r.len())));
            }
            if r.iter().any(|&v| v > 1) {
                return Err(LabelError::Shape(format!("row {i} is not binary")));
            }
            data.extend(r);
        }
        Ok(LabelMatrix { vocab, rows: n, data })
    }

    /// One-hot matrix for single-label class ids; the vocabulary is a
    /// placeholder naming the classes `AU1..AUk` positionally.
    pub fn one_hot(classes: &[usize], n_classes: usize) -> Result<Self, LabelError> {
        let vocab = AuVocabulary::new(
            "one-hot",
            (1..=n_classes as u16).map(|k| AuCode::new(k).expect("nonzero")).collect(),
        )?;
        let mut data = vec![0u8; classes.len() * n_classes];
        for (i, &c) in classes.iter().enumerate() {
            if c >= n_classes {
                return Err(LabelError::Shape(format!("class {c} out of range {n_classes}")));
            }
            data[i * n_classes + c] = 1;
        }
        Ok(LabelMatrix { vocab, rows: classes.len(), data })
    }

    pub fn vocab(&self) -> &AuVocabulary {
        &self.vocab
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.vocab.len()
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.data[row * self.cols() + col]
    }

    pub fn row(&self, row: usize) -> &[u8] {
        let c = self.cols();
        &self.data[row * c..(row + 1) * c]
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.data
    }

    pub fn column_sums(&self) -> Vec<usize> {
        let mut sums = vec![0; self.cols()];
        for r in 0..self.rows {
            for (c, s) in sums.iter_mut().enumerate() {
                *s += self.get(r, c) as usize;
            }
        }
        sums
    }

    pub fn select_rows(&self, idx: &[usize]) -> LabelMatrix {
        let mut data = Vec::with_capacity(idx.len() * self.cols());
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        LabelMatrix { vocab: self.vocab.clone(), rows: idx.len(), data }
    }
}

/// Encodes AU sets as a multi-hot matrix over `vocab`. AUs outside the
/// vocabulary are dropped and counted in the coverage report.
pub fn encode_labels<'a>(
    samples: impl IntoIterator<Item = &'a Sample>,
    vocab: &AuVocabulary,
) -> Result<(LabelMatrix, CoverageReport), LabelError> {
    if vocab.is_empty() {
        return Err(LabelError::EmptyVocabulary);
    }
    let cols = vocab.len();
    let mut data = Vec::new();
    let mut coverage = CoverageReport::default();
    let mut rows = 0;
    for s in samples {
        let mut row = vec![0u8; cols];
        for &au in &s.au_set {
            match vocab.index_of(au) {
                Some(c) => row[c] = 1,
                None => *coverage.dropped.entry(au).or_default() += 1,
            }
        }
        if row.iter().all(|&v| v == 0) {
            coverage.samples_without_labels += 1;
        }
        data.extend(row);
        rows += 1;
    }
    Ok((LabelMatrix { vocab: vocab.clone(), rows, data }, coverage))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::DatasetId;
    use proptest::prelude::*;

    fn sample(i: usize, aus: &[u16]) -> Sample {
        Sample::new(format!("x{i}"), DatasetId::Casme2, "s", 0, 1, Some(2), aus.iter().map(|&n| AuCode::new(n).unwrap()))
            .unwrap()
    }

    #[test]
    fn encodes_against_cd6me() {
        let (m, cov) = encode_labels(&[sample(0, &[4, 12])], &AuVocabulary::cd6me()).unwrap();
        let mut expect = vec![0u8; 12];
        expect[2] = 1;
        expect[8] = 1;
        assert_eq!(m.row(0), expect.as_slice());
        assert_eq!(cov.total_dropped(), 0);
    }

    #[test]
    fn out_of_vocabulary_is_counted() {
        let (m, cov) = encode_labels(&[sample(0, &[23])], &AuVocabulary::cd6me()).unwrap();
        assert!(m.row(0).iter().all(|&v| v == 0));
        assert_eq!(cov.total_dropped(), 1);
        assert_eq!(cov.samples_without_labels, 1);
    }

    #[test]
    fn empty_vocabulary_rejected() {
        let v = AuVocabulary::new("none", vec![]).unwrap();
        assert!(matches!(encode_labels(&[sample(0, &[1])], &v), Err(LabelError::EmptyVocabulary)));
    }

    #[test]
    fn one_hot_rows() {
        let m = LabelMatrix::one_hot(&[2, 0], 3).unwrap();
        assert_eq!(m.row(0), &[0, 0, 1]);
        assert_eq!(m.column_sums(), vec![1, 0, 1]);
        assert!(LabelMatrix::one_hot(&[3], 3).is_err());
    }

    proptest! {
        #[test]
        fn column_sums_ignore_order(sets in prop::collection::vec(prop::collection::vec(1u16..20, 0..5), 1..30), rot in 0usize..30) {
            let samples: Vec<_> = sets.iter().enumerate().map(|(i, s)| sample(i, s)).collect();
            let mut shuffled = samples.clone();
            let k = rot % shuffled.len();
            shuffled.rotate_left(k);
            shuffled.reverse();
            let v = AuVocabulary::cd6me();
            let (a, _) = encode_labels(&samples, &v).unwrap();
            let (b, _) = encode_labels(&shuffled, &v).unwrap();
            prop_assert_eq!(a.column_sums(), b.column_sums());
            for (i, s) in samples.iter().enumerate() {
                for (c, au) in v.aus().iter().enumerate() {
                    prop_assert_eq!(a.get(i, c) == 1, s.au_set.contains(au));
                }
            }
        }
    }
}
