// SPDX-License-Identifier: Apache-2.0

//! Synthetic datasets with exactly controlled AU marginals.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{AuCode, DataError, DatasetId, DatasetTable, Sample};

/// Deterministic emotion label as a function of the AU set: the AU numbers
/// are summed and reduced modulo the class count, giving labels `E0`, `E1`, ...
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmotionRule {
    pub n_classes: usize,
}

impl EmotionRule {
    pub fn class_of(&self, aus: &BTreeSet<AuCode>) -> usize {
        let sum: usize = aus.iter().map(|a| a.number() as usize).sum();
        sum % self.n_classes
    }

    pub fn label(class: usize) -> String {
        format!("E{class}")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticDataset {
    /// A real dataset code (`C1`, `SA`, ...) or any other name, which becomes
    /// `synthetic-<name>`.
    pub name: String,
    pub n_samples: usize,
    pub n_subjects: usize,
    #[serde(default)]
    pub au_counts: BTreeMap<AuCode, usize>,
}

impl SyntheticDataset {
    pub fn dataset_id(&self) -> DatasetId {
        self.name
            .parse()
            .unwrap_or_else(|_| DatasetId::Synthetic(self.name.clone()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub seed: u64,
    pub datasets: Vec<SyntheticDataset>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub emotion: Option<EmotionRule>,
    /// Probability of replacing the rule's emotion by a different class.
    #[serde(default)]
    pub noise_rate: f64,
}

impl SyntheticSpec {
    /// A corpus of `n_datasets` equally sized datasets whose pooled AU counts
    /// equal `au_counts` exactly. Per-dataset counts are split in proportion
    /// to dataset size by largest remainder.
    pub fn composite(
        n_samples: usize,
        au_counts: &BTreeMap<AuCode, usize>,
        n_subjects: usize,
        n_datasets: usize,
        seed: u64,
    ) -> Result<Self, DataError> {
        if n_datasets == 0 || n_samples < n_datasets || n_subjects < n_datasets {
            return Err(DataError::InfeasibleSpec(format!(
                "{n_samples} samples / {n_subjects} subjects cannot fill {n_datasets} datasets"
            )));
        }
        let sizes = split_even(n_samples, n_datasets);
        let subjects = split_even(n_subjects, n_datasets);
        let mut datasets: Vec<SyntheticDataset> = sizes
            .iter()
            .zip(&subjects)
            .enumerate()
            .map(|(d, (&n, &k))| SyntheticDataset {
                name: format!("d{d}"),
                n_samples: n,
                n_subjects: k,
                au_counts: BTreeMap::new(),
            })
            .collect();
        for (&au, &count) in au_counts {
            if count > n_samples {
                return Err(DataError::InfeasibleSpec(format!(
                    "{au}: {count} positives exceeds {n_samples} samples"
                )));
            }
            for (d, share) in largest_remainder(count, &sizes).into_iter().enumerate() {
                datasets[d].au_counts.insert(au, share);
            }
        }
        Ok(SyntheticSpec { seed, datasets, emotion: None, noise_rate: 0.0 })
    }

    pub fn with_emotion(mut self, rule: EmotionRule, noise_rate: f64) -> Self {
        self.emotion = Some(rule);
        self.noise_rate = noise_rate;
        self
    }

    pub fn validate(&self) -> Result<(), DataError> {
        if !(0.0..=1.0).contains(&self.noise_rate) {
            return Err(DataError::InfeasibleSpec(format!("noise rate {} outside [0,1]", self.noise_rate)));
        }
        if let Some(rule) = &self.emotion {
            if rule.n_classes < 2 && self.noise_rate > 0.0 {
                return Err(DataError::InfeasibleSpec("label noise needs at least two classes".into()));
            }
            if rule.n_classes == 0 {
                return Err(DataError::InfeasibleSpec("emotion rule needs at least one class".into()));
            }
        }
        let mut ids = BTreeSet::new();
        for d in &self.datasets {
            if !ids.insert(d.dataset_id()) {
                return Err(DataError::InfeasibleSpec(format!("dataset {} listed twice", d.name)));
            }
            if d.n_samples == 0 || d.n_subjects == 0 || d.n_subjects > d.n_samples {
                return Err(DataError::InfeasibleSpec(format!(
                    "dataset {}: {} samples, {} subjects",
                    d.name, d.n_samples, d.n_subjects
                )));
            }
            if let Some((au, c)) = d.au_counts.iter().find(|(_, &c)| c > d.n_samples) {
                return Err(DataError::InfeasibleSpec(format!(
                    "dataset {}: {au} count {c} exceeds {} samples",
                    d.name, d.n_samples
                )));
            }
        }
        Ok(())
    }
}

fn split_even(total: usize, parts: usize) -> Vec<usize> {
    (0..parts).map(|i| total / parts + usize::from(i < total % parts)).collect()
}

/// Splits `count` proportionally to `weights`; shares sum to `count` and never
/// exceed their weight when `count <= sum(weights)`.
fn largest_remainder(count: usize, weights: &[usize]) -> Vec<usize> {
    let total: usize = weights.iter().sum();
    let mut shares: Vec<usize> = weights.iter().map(|&w| count * w / total).collect();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    // remainder numerators, larger first; ties to the lower index
    order.sort_by_key(|&i| (std::cmp::Reverse(count * weights[i] % total), i));
    let mut left = count - shares.iter().sum::<usize>();
    for i in order.into_iter().cycle() {
        if left == 0 {
            break;
        }
        if shares[i] < weights[i] {
            shares[i] += 1;
            left -= 1;
        }
    }
    shares
}

/// Generates one table per dataset of `spec`.
///
/// Each AU is assigned to exactly its requested number of samples (drawn
/// without replacement), subjects are assigned round-robin, and the optional
/// emotion label follows [`EmotionRule`] with label noise at `noise_rate`.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Vec<DatasetTable>, DataError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut tables = Vec::with_capacity(spec.datasets.len());
    for d in &spec.datasets {
        let id = d.dataset_id();
        let mut sets = vec![BTreeSet::new(); d.n_samples];
        for (&au, &count) in &d.au_counts {
            for i in index::sample(&mut rng, d.n_samples, count) {
                sets[i].insert(au);
            }
        }
        let mut samples = Vec::with_capacity(d.n_samples);
        for (i, aus) in sets.into_iter().enumerate() {
            let onset = rng.random_range(0..40u32);
            let apex = onset + rng.random_range(1..30u32);
            let offset = apex + rng.random_range(1..40u32);
            let subject = format!("s{:03}", i % d.n_subjects);
            let mut s = Sample::new(format!("{id}/{subject}/{i:05}"), id.clone(), subject, onset, apex, Some(offset), aus)?;
            if let Some(rule) = &spec.emotion {
                let mut class = rule.class_of(&s.au_set);
                if spec.noise_rate > 0.0 && rng.random_bool(spec.noise_rate) {
                    let shift = rng.random_range(1..rule.n_classes);
                    class = (class + shift) % rule.n_classes;
                }
                s.emotion = Some(EmotionRule::label(class));
            }
            samples.push(s);
        }
        tables.push(DatasetTable::new(id, samples)?);
    }
    Ok(tables)
}
