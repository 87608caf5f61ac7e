// SPDX-License-Identifier: Apache-2.0

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::ProtocolError;
use crate::data::{DatasetId, DatasetTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Protocol {
    /// Leave one subject out.
    Loso,
    /// Leave one dataset out.
    Lodo,
    /// Train on some datasets, test on another.
    Holdout,
    /// Person-dependent split; subjects appear on both sides. Not rankable.
    Pde,
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Protocol::Loso => "LOSO",
            Protocol::Lodo => "LODO",
            Protocol::Holdout => "HOLDOUT",
            Protocol::Pde => "PDE",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub fold_key: String,
    pub train_idx: Vec<usize>,
    pub test_idx: Vec<usize>,
}

/// Train/test splits over a universe of samples.
///
/// Universe indices follow the concatenation order of `datasets`.
/// Indices from `auxiliary_start` on are training-only extra data and are
/// never tested.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub protocol: Protocol,
    pub folds: Vec<Fold>,
    pub universe: usize,
    pub datasets: Vec<DatasetId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub auxiliary_start: Option<usize>,
    pub rankable: bool,
    /// SHA-256 over the universe's sample ids, for checking a stored plan
    /// against the data it is replayed on.
    pub sample_digest: String,
}

/// Per-universe-index identity used for invariant checks.
#[derive(Debug, Clone)]
pub struct PlanKeys {
    pub datasets: Vec<String>,
    pub subjects: Vec<String>,
}

impl PlanKeys {
    pub fn from_tables<'a>(tables: impl IntoIterator<Item = &'a DatasetTable>) -> Self {
        let mut datasets = Vec::new();
        let mut subjects = Vec::new();
        for t in tables {
            for s in t.samples() {
                datasets.push(s.dataset_id.to_string());
                subjects.push(subject_key(&s.dataset_id, &s.subject_id));
            }
        }
        PlanKeys { datasets, subjects }
    }
}

/// Subjects are namespaced by dataset.
pub fn subject_key(dataset: &DatasetId, subject: &str) -> String {
    format!("{dataset}/{subject}")
}

fn digest<'a>(tables: impl IntoIterator<Item = &'a DatasetTable>) -> String {
    let mut h = Sha256::new();
    for t in tables {
        for s in t.samples() {
            h.update(s.sample_id.as_bytes());
            h.update([0u8]);
        }
    }
    hex::encode(h.finalize())
}

impl FoldPlan {
    pub fn n_folds(&self) -> usize {
        self.folds.len()
    }

    /// Checks that a stored plan was built over `tables`.
    pub fn matches(&self, tables: &[&DatasetTable]) -> bool {
        let ids: Vec<DatasetId> = tables.iter().map(|t| t.dataset_id().clone()).collect();
        ids == self.datasets
            && tables.iter().map(|t| t.len()).sum::<usize>() == self.universe
            && digest(tables.iter().copied()) == self.sample_digest
    }

    /// Evaluated (non-auxiliary) index range end.
    pub fn evaluated(&self) -> usize {
        self.auxiliary_start.unwrap_or(self.universe)
    }

    /// All invariant violations of this plan, as human-readable strings.
    pub fn violations(&self, keys: &PlanKeys) -> Vec<String> {
        let mut out = Vec::new();
        if keys.subjects.len() != self.universe {
            out.push(format!("keys cover {} samples, universe is {}", keys.subjects.len(), self.universe));
            return out;
        }
        for f in &self.folds {
            let train: BTreeSet<usize> = f.train_idx.iter().copied().collect();
            if f.test_idx.is_empty() {
                out.push(format!("fold {}: empty test set", f.fold_key));
            }
            if train.is_empty() {
                out.push(format!("fold {}: empty training set", f.fold_key));
            }
            if let Some(i) = f.train_idx.iter().chain(&f.test_idx).find(|&&i| i >= self.universe) {
                out.push(format!("fold {}: index {i} outside universe", f.fold_key));
                continue;
            }
            if let Some(i) = f.test_idx.iter().find(|i| train.contains(i)) {
                out.push(format!("fold {}: index {i} on both sides", f.fold_key));
            }
            let side = |idx: &[usize], by: &[String]| -> BTreeSet<String> { idx.iter().map(|&i| by[i].clone()).collect() };
            let check = |by: &[String], what: &str, out: &mut Vec<String>| {
                let a = side(&f.train_idx, by);
                if let Some(k) = side(&f.test_idx, by).intersection(&a).next() {
                    out.push(format!("fold {}: {what} {k} on both sides", f.fold_key));
                }
            };
            match self.protocol {
                Protocol::Loso => check(&keys.subjects, "subject", &mut out),
                Protocol::Lodo | Protocol::Holdout => check(&keys.datasets, "dataset", &mut out),
                Protocol::Pde => {}
            }
        }
        if matches!(self.protocol, Protocol::Loso | Protocol::Lodo | Protocol::Pde) {
            let mut tested: Vec<usize> = self.folds.iter().flat_map(|f| f.test_idx.iter().copied()).collect();
            tested.sort_unstable();
            if tested != (0..self.evaluated()).collect::<Vec<_>>() {
                out.push("test sets do not partition the evaluated universe".into());
            }
        }
        out
    }
}

/// One fold per (dataset, subject), ordered by key.
pub fn make_loso(tables: &[DatasetTable]) -> Result<FoldPlan, ProtocolError> {
    make_loso_with_auxiliary(tables, &[])
}

/// LOSO over `primary`; every sample of `auxiliary` is added to every
/// training set and never tested.
pub fn make_loso_with_auxiliary(primary: &[DatasetTable], auxiliary: &[DatasetTable]) -> Result<FoldPlan, ProtocolError> {
    check_distinct(primary.iter().chain(auxiliary))?;
    let keys = PlanKeys::from_tables(primary);
    let n_primary = keys.subjects.len();
    let n_aux: usize = auxiliary.iter().map(DatasetTable::len).sum();
    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, k) in keys.subjects.iter().enumerate() {
        groups.entry(k.as_str()).or_default().push(i);
    }
    if groups.len() < 2 && n_aux == 0 {
        return Err(ProtocolError::Degenerate("empty training set".into()));
    }
    let folds = groups
        .into_iter()
        .map(|(key, test_idx)| {
            let train_idx = (0..n_primary + n_aux).filter(|i| !(*i < n_primary && keys.subjects[*i] == key)).collect();
            Fold { fold_key: key.to_string(), train_idx, test_idx }
        })
        .collect();
    Ok(FoldPlan {
        protocol: Protocol::Loso,
        folds,
        universe: n_primary + n_aux,
        datasets: primary.iter().chain(auxiliary).map(|t| t.dataset_id().clone()).collect(),
        auxiliary_start: (n_aux > 0).then_some(n_primary),
        rankable: true,
        sample_digest: digest(primary.iter().chain(auxiliary)),
    })
}

/// One fold per table: fold `k` tests table `k` and trains on the rest.
pub fn make_lodo(tables: &[DatasetTable]) -> Result<FoldPlan, ProtocolError> {
    if tables.len() < 2 {
        return Err(ProtocolError::TooFewTables(tables.len()));
    }
    check_distinct(tables)?;
    let mut offsets = Vec::with_capacity(tables.len());
    let mut start = 0;
    for t in tables {
        offsets.push(start..start + t.len());
        start += t.len();
    }
    let universe = start;
    let folds = tables
        .iter()
        .zip(&offsets)
        .map(|(t, range)| Fold {
            fold_key: t.dataset_id().to_string(),
            train_idx: (0..universe).filter(|i| !range.contains(i)).collect(),
            test_idx: range.clone().collect(),
        })
        .collect();
    Ok(FoldPlan {
        protocol: Protocol::Lodo,
        folds,
        universe,
        datasets: tables.iter().map(|t| t.dataset_id().clone()).collect(),
        auxiliary_start: None,
        rankable: true,
        sample_digest: digest(tables),
    })
}

pub fn make_holdout(train: &DatasetTable, test: &DatasetTable) -> Result<FoldPlan, ProtocolError> {
    make_holdout_multi(&[train], test)
}

/// A single fold training on the union of `train` and testing on `test`.
/// Universe order: the train tables, then the test table.
pub fn make_holdout_multi(train: &[&DatasetTable], test: &DatasetTable) -> Result<FoldPlan, ProtocolError> {
    if train.is_empty() {
        return Err(ProtocolError::TooFewTables(1));
    }
    let all: Vec<&DatasetTable> = train.iter().copied().chain([test]).collect();
    check_distinct(all.iter().copied()).map_err(|e| match e {
        ProtocolError::DuplicateDataset(d) if d == test.dataset_id().to_string() => ProtocolError::SameDataset(d),
        other => other,
    })?;
    let n_train: usize = train.iter().map(|t| t.len()).sum();
    let universe = n_train + test.len();
    Ok(FoldPlan {
        protocol: Protocol::Holdout,
        folds: vec![Fold {
            fold_key: format!(
                "{}->{}",
                train.iter().map(|t| t.dataset_id().to_string()).collect::<Vec<_>>().join("+"),
                test.dataset_id()
            ),
            train_idx: (0..n_train).collect(),
            test_idx: (n_train..universe).collect(),
        }],
        universe,
        datasets: all.iter().map(|t| t.dataset_id().clone()).collect(),
        auxiliary_start: None,
        rankable: true,
        sample_digest: digest(all.iter().copied()),
    })
}

/// Person-dependent `k`-fold split: every subject's samples are shuffled and
/// dealt round-robin over the folds, so subjects appear in train and test.
/// Provided for comparison only; the plan is marked non-rankable.
pub fn make_pde(tables: &[DatasetTable], k: usize, seed: u64) -> Result<FoldPlan, ProtocolError> {
    check_distinct(tables)?;
    let keys = PlanKeys::from_tables(tables);
    let universe = keys.subjects.len();
    if k < 2 || universe < k {
        return Err(ProtocolError::Degenerate(format!("{k}-fold split of {universe} samples")));
    }
    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, s) in keys.subjects.iter().enumerate() {
        groups.entry(s.as_str()).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tests = vec![Vec::new(); k];
    let mut next = 0;
    for (_, mut idx) in groups {
        idx.shuffle(&mut rng);
        for i in idx {
            tests[next % k].push(i);
            next += 1;
        }
    }
    let folds = tests
        .into_iter()
        .enumerate()
        .map(|(f, mut test_idx)| {
            test_idx.sort_unstable();
            let held: BTreeSet<usize> = test_idx.iter().copied().collect();
            Fold {
                fold_key: format!("pde-{f}"),
                train_idx: (0..universe).filter(|i| !held.contains(i)).collect(),
                test_idx,
            }
        })
        .collect();
    Ok(FoldPlan {
        protocol: Protocol::Pde,
        folds,
        universe,
        datasets: tables.iter().map(|t| t.dataset_id().clone()).collect(),
        auxiliary_start: None,
        rankable: false,
        sample_digest: digest(tables),
    })
}

/// Number of sample uses over the whole plan: folds times universe size.
pub fn training_cost(plan: &FoldPlan) -> u64 {
    plan.folds.len() as u64 * plan.universe as u64
}

/// Subject-disjoint train/validation split of a fold's training side.
///
/// Subjects are shuffled and moved to validation until it holds at least
/// `val_fraction` of the samples. Fails when it would leave either side
/// empty.
pub fn validation_split(
    train_idx: &[usize],
    subjects: &[String],
    val_fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>), ProtocolError> {
    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for &i in train_idx {
        groups.entry(subjects[i].as_str()).or_default().push(i);
    }
    let mut order: Vec<&str> = groups.keys().copied().collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let target = (val_fraction * train_idx.len() as f64).round().max(1.0) as usize;
    let mut val = Vec::new();
    let mut taken = BTreeSet::new();
    for s in order {
        if val.len() >= target {
            break;
        }
        val.extend(&groups[s]);
        taken.insert(s);
    }
    let train: Vec<usize> = train_idx.iter().copied().filter(|&i| !taken.contains(subjects[i].as_str())).collect();
    if val.is_empty() || train.is_empty() || val_fraction <= 0.0 {
        return Err(ProtocolError::EmptyValidation);
    }
    val.sort_unstable();
    Ok((train, val))
}

fn check_distinct<'a>(tables: impl IntoIterator<Item = &'a DatasetTable>) -> Result<(), ProtocolError> {
    let mut seen = BTreeSet::new();
    for t in tables {
        if !seen.insert(t.dataset_id().clone()) {
            return Err(ProtocolError::DuplicateDataset(t.dataset_id().to_string()));
        }
    }
    Ok(())
}
