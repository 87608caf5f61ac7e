// SPDX-License-Identifier: Apache-2.0

//! Published per-dataset marginals of the six-dataset composite, and tables
//! generated to match them exactly.

use std::collections::BTreeMap;

use crate::data::{generate_synthetic, AuCode, DataError, DatasetId, DatasetTable, SyntheticDataset, SyntheticSpec};
use crate::labels::CD6ME_AUS;

/// Samples and subjects per dataset.
pub const DATASET_SIZES: [(DatasetId, usize, usize); 6] = [
    (DatasetId::Casme, 189, 19),
    (DatasetId::Casme2, 256, 26),
    (DatasetId::Samm, 159, 29),
    (DatasetId::FourDme, 267, 42),
    (DatasetId::Mmew, 300, 30),
    (DatasetId::Casme3, 860, 94),
];

/// Positive counts of the twelve composite AUs (in `CD6ME_AUS` order) per
/// dataset, in the order of [`DATASET_SIZES`].
pub const AU_COUNTS: [[usize; 12]; 6] = [
    [23, 17, 70, 0, 1, 4, 40, 3, 9, 23, 14, 13],
    [26, 22, 130, 2, 13, 39, 13, 16, 34, 27, 16, 25],
    [6, 18, 23, 10, 3, 46, 5, 6, 28, 13, 4, 6],
    [46, 54, 102, 8, 25, 89, 1, 2, 53, 4, 6, 11],
    [50, 41, 109, 70, 10, 47, 8, 38, 37, 17, 6, 11],
    [153, 128, 274, 44, 8, 27, 50, 10, 15, 193, 6, 20],
];

pub fn composite_size() -> usize {
    DATASET_SIZES.iter().map(|d| d.1).sum()
}

/// Pooled positives per AU over all six datasets.
pub fn composite_counts() -> [usize; 12] {
    let mut out = [0; 12];
    for row in &AU_COUNTS {
        for (o, c) in out.iter_mut().zip(row) {
            *o += c;
        }
    }
    out
}

/// Six tables whose sizes, subject counts and per-dataset AU counts equal
/// the published marginals. Which samples carry which AU is drawn from
/// `seed`; counts do not depend on it.
pub fn cd6me_marginal_tables(seed: u64) -> Result<Vec<DatasetTable>, DataError> {
    let datasets = DATASET_SIZES
        .iter()
        .zip(&AU_COUNTS)
        .map(|((id, n, subjects), counts)| SyntheticDataset {
            name: id.code(),
            n_samples: *n,
            n_subjects: *subjects,
            au_counts: CD6ME_AUS
                .iter()
                .zip(counts)
                .map(|(&a, &c)| (AuCode::new(a).expect("nonzero"), c))
                .collect::<BTreeMap<_, _>>(),
        })
        .collect();
    generate_synthetic(&SyntheticSpec { seed, datasets, emotion: None, noise_rate: 0.0 })
}
