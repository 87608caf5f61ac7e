// SPDX-License-Identifier: Apache-2.0

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{FeatureError, FeatureRecord};
use crate::data::Sample;

/// Generator for descriptor vectors with a known AU signal.
///
/// A sample's vector is the sum of its AUs' prototypes, scaled by `signal`,
/// plus a per-dataset offset, a per-subject offset and per-sample noise.
/// Prototypes are shared across datasets, so what is learned on one source
/// transfers to another up to the dataset offset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticFeatureSpec {
    pub dim: usize,
    pub signal: f64,
    pub noise: f64,
    pub dataset_shift: f64,
    pub subject_shift: f64,
    pub seed: u64,
}

impl Default for SyntheticFeatureSpec {
    fn default() -> Self {
        SyntheticFeatureSpec { dim: 32, signal: 1.0, noise: 1.0, dataset_shift: 0.5, subject_shift: 0.3, seed: 0 }
    }
}

/// Stable 64-bit stream id from a seed and a string key.
pub fn derive_seed(seed: u64, key: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(key.as_bytes());
    u64::from_le_bytes(h.finalize()[..8].try_into().expect("8 bytes"))
}

fn gaussian(seed: u64, key: &str, dim: usize, scale: f64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, key));
    let n = Normal::new(0.0, 1.0).expect("unit normal");
    (0..dim).map(|_| scale * n.sample(&mut rng)).collect()
}

fn one(sample: &Sample, spec: &SyntheticFeatureSpec) -> Vec<f32> {
    let mut x = vec![0.0f64; spec.dim];
    let mut add = |v: Vec<f64>| x.iter_mut().zip(v).for_each(|(a, b)| *a += b);
    for au in &sample.au_set {
        add(gaussian(spec.seed, &format!("au/{au}"), spec.dim, spec.signal));
    }
    add(gaussian(spec.seed, &format!("dataset/{}", sample.dataset_id), spec.dim, spec.dataset_shift));
    add(gaussian(spec.seed, &format!("subject/{}/{}", sample.dataset_id, sample.subject_id), spec.dim, spec.subject_shift));
    add(gaussian(spec.seed, &format!("sample/{}", sample.sample_id), spec.dim, spec.noise));
    x.into_iter().map(|v| v as f32).collect()
}

/// Feature vectors for `samples`, in order. Each sample's vector depends only
/// on its own identity and the spec, never on the other samples.
pub fn synthesize_features(samples: &[&Sample], spec: &SyntheticFeatureSpec) -> Result<Vec<Vec<f32>>, FeatureError> {
    if spec.dim == 0 || !(spec.noise >= 0.0 && spec.signal.is_finite()) {
        return Err(FeatureError::Params(format!("synthetic features: dim {} noise {}", spec.dim, spec.noise)));
    }
    Ok(samples.par_iter().map(|s| one(s, spec)).collect())
}

pub fn synthesize_records(samples: &[&Sample], spec: &SyntheticFeatureSpec) -> Result<Vec<FeatureRecord>, FeatureError> {
    Ok(synthesize_features(samples, spec)?
        .into_iter()
        .zip(samples)
        .map(|(v, s)| FeatureRecord::descriptor(s.sample_id.clone(), v))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{AuCode, DatasetId};

    fn s(id: &str, subj: &str, aus: &[u16]) -> Sample {
        Sample::new(id, DatasetId::Samm, subj, 0, 1, Some(2), aus.iter().map(|&a| AuCode::new(a).unwrap())).unwrap()
    }

    #[test]
    fn deterministic_and_order_independent() {
        let a = s("a", "1", &[4]);
        let b = s("b", "2", &[1, 2]);
        let spec = SyntheticFeatureSpec::default();
        let ab = synthesize_features(&[&a, &b], &spec).unwrap();
        let ba = synthesize_features(&[&b, &a], &spec).unwrap();
        assert_eq!(ab[0], ba[1]);
        assert_eq!(ab[1], ba[0]);
        assert_eq!(ab[0].len(), 32);
    }

    #[test]
    fn noiseless_vectors_are_prototype_sums() {
        let spec = SyntheticFeatureSpec { noise: 0.0, dataset_shift: 0.0, subject_shift: 0.0, ..Default::default() };
        let f = synthesize_features(&[&s("a", "1", &[1]), &s("b", "1", &[2]), &s("c", "1", &[1, 2])], &spec).unwrap();
        for i in 0..spec.dim {
            assert!((f[0][i] + f[1][i] - f[2][i]).abs() < 1e-5);
        }
        let empty = synthesize_features(&[&s("d", "1", &[])], &spec).unwrap();
        assert!(empty[0].iter().all(|&x| x == 0.0));
    }

    #[test]
    fn bad_spec() {
        let spec = SyntheticFeatureSpec { dim: 0, ..Default::default() };
        assert!(synthesize_features(&[], &spec).is_err());
    }
}
