// SPDX-License-Identifier: Apache-2.0

//! Feature sources, model templates and task assembly shared by the studies.

use std::collections::BTreeSet;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::ExperimentError;
use crate::data::{DatasetId, DatasetTable, Sample};
use crate::features::{synthesize_features, FeatureStore, SyntheticFeatureSpec};
use crate::labels::AuVocabulary;
use crate::learn::{run_protocol, ModelKind, ModelSpec, RunOptions, RunReport, Stopping, TaskData, TrainConfig};
use crate::protocols::{AccessMode, FoldPlan};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FeatureSource {
    Synthetic(SyntheticFeatureSpec),
    /// A feature file; each record's payload is flattened into one vector.
    Store { path: PathBuf },
}

impl Default for FeatureSource {
    fn default() -> Self {
        FeatureSource::Synthetic(SyntheticFeatureSpec::default())
    }
}

impl FeatureSource {
    pub fn load(&self, samples: &[&Sample]) -> Result<Vec<Vec<f32>>, ExperimentError> {
        match self {
            FeatureSource::Synthetic(spec) => Ok(synthesize_features(samples, spec)?),
            FeatureSource::Store { path } => {
                let store = FeatureStore::open(path)?;
                let rows = samples
                    .iter()
                    .map(|s| store.get(&s.sample_id).map(|r| r.payload))
                    .collect::<Result<Vec<_>, _>>()?;
                if let Some(bad) = rows.iter().position(|r| r.len() != rows[0].len()) {
                    return Err(ExperimentError::Features(format!(
                        "sample {} has {} values, expected {}",
                        samples[bad].sample_id,
                        rows[bad].len(),
                        rows[0].len()
                    )));
                }
                Ok(rows)
            }
        }
    }
}

/// A model without its dimensions, which come from the task at run time.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelTemplate {
    pub name: String,
    pub kind: ModelKind,
    #[serde(default)]
    pub hidden: Vec<usize>,
    #[serde(default)]
    pub init_seed: u64,
}

impl ModelTemplate {
    pub fn new(name: impl Into<String>, kind: ModelKind) -> Self {
        ModelTemplate { name: name.into(), kind, hidden: Vec::new(), init_seed: 0 }
    }

    pub fn constant() -> Self {
        ModelTemplate::new("Constant", ModelKind::ConstantPositive)
    }

    pub fn mlp(name: impl Into<String>, hidden: Vec<usize>) -> Self {
        ModelTemplate { hidden, ..ModelTemplate::new(name, ModelKind::Mlp) }
    }

    pub fn instantiate(&self, input_dim: usize, output_dim: usize) -> ModelSpec {
        ModelSpec { kind: self.kind, input_dim, output_dim, hidden: self.hidden.clone(), init_seed: self.init_seed }
    }
}

/// `models` with the constant floor first, added when missing.
pub(crate) fn with_constant(models: &[ModelTemplate]) -> Vec<ModelTemplate> {
    let mut out = models.to_vec();
    if !out.iter().any(|m| m.kind == ModelKind::ConstantPositive) {
        out.insert(0, ModelTemplate::constant());
    }
    out
}

/// The tables with the given ids, in that order, or the list of missing ids.
pub(crate) fn require<'a>(tables: &'a [DatasetTable], ids: &[DatasetId]) -> Result<Vec<&'a DatasetTable>, ExperimentError> {
    let missing: Vec<String> =
        ids.iter().filter(|id| !tables.iter().any(|t| t.dataset_id() == *id)).map(ToString::to_string).collect();
    if !missing.is_empty() {
        return Err(ExperimentError::MissingTables(missing));
    }
    Ok(ids.iter().map(|id| tables.iter().find(|t| t.dataset_id() == id).expect("checked")).collect())
}

pub(crate) fn samples_of<'a>(tables: &[&'a DatasetTable]) -> Vec<&'a Sample> {
    tables.iter().flat_map(|t| t.samples()).collect()
}

pub(crate) fn multilabel_task(
    tables: &[&DatasetTable],
    features: &FeatureSource,
    vocab: &AuVocabulary,
) -> Result<TaskData, ExperimentError> {
    let samples = samples_of(tables);
    let x = features.load(&samples)?;
    Ok(TaskData::multilabel(&samples, &x, vocab)?)
}

/// Training-free models give the same result for every seed and epoch, so
/// they are run once with a single epoch.
pub(crate) fn effective_config(model: &ModelTemplate, cfg: &TrainConfig) -> TrainConfig {
    if model.kind == ModelKind::ConstantPositive {
        TrainConfig { max_epochs: 1, stopping: Stopping::FixedEpoch, seeds: cfg.seeds[..1.min(cfg.seeds.len())].to_vec(), ..cfg.clone() }
    } else {
        cfg.clone()
    }
}

/// Runs `model` on a guarded plan and rejects incomplete runs.
pub(crate) fn run_model(
    model: &ModelTemplate,
    plan: &FoldPlan,
    data: &TaskData,
    cfg: &TrainConfig,
) -> Result<RunReport, ExperimentError> {
    let spec = model.instantiate(data.features.cols(), data.n_classes());
    let report =
        run_protocol(&spec, plan, data, &effective_config(model, cfg), &RunOptions { mode: Some(AccessMode::Guarded), ..Default::default() })?;
    complete(report)
}

pub(crate) fn complete(report: RunReport) -> Result<RunReport, ExperimentError> {
    if !report.complete {
        let why = report.seeds.iter().find_map(|s| s.partial.clone()).unwrap_or_default();
        return Err(ExperimentError::Incomplete(why));
    }
    Ok(report)
}

/// Fails when any training index of `plan` points at a sample from one of
/// the `test` datasets.
pub(crate) fn assert_training_excludes(plan: &FoldPlan, data: &TaskData, test: &BTreeSet<String>) -> Result<(), ExperimentError> {
    for f in &plan.folds {
        if let Some(&i) = f.train_idx.iter().find(|&&i| test.contains(&data.datasets[i])) {
            return Err(ExperimentError::Leak(format!(
                "fold {}: training sample {} comes from test dataset {}",
                f.fold_key, data.sample_ids[i], data.datasets[i]
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, SyntheticSpec};
    use crate::features::{write_features, FeatureRecord};

    #[test]
    fn store_source_flattens_payloads() {
        let tables = generate_synthetic(&SyntheticSpec::composite(6, &Default::default(), 2, 1, 0).unwrap()).unwrap();
        let samples: Vec<&Sample> = tables[0].samples().iter().collect();
        let records: Vec<FeatureRecord> = samples
            .iter()
            .enumerate()
            .map(|(i, s)| FeatureRecord::descriptor(s.sample_id.clone(), vec![i as f32, 1.0]))
            .collect();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.mebf");
        write_features(&path, &records).unwrap();
        let x = FeatureSource::Store { path }.load(&samples).unwrap();
        assert_eq!(x[3], vec![3.0, 1.0]);
    }

    #[test]
    fn constant_is_prepended_once() {
        let m = with_constant(&[ModelTemplate::mlp("mlp", vec![4])]);
        assert_eq!(m[0], ModelTemplate::constant());
        assert_eq!(with_constant(&m).len(), 2);
    }

    #[test]
    fn require_reports_missing_ids() {
        let tables = generate_synthetic(&SyntheticSpec::composite(6, &Default::default(), 2, 1, 0).unwrap()).unwrap();
        match require(&tables, &[DatasetId::Casme, DatasetId::Samm]) {
            Err(ExperimentError::MissingTables(m)) => assert_eq!(m, ["C1", "SA"]),
            other => panic!("{other:?}"),
        }
    }
}
