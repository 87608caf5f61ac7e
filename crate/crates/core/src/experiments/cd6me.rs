// SPDX-License-Identifier: Apache-2.0

//! Leave-one-dataset-out benchmark over the six composite sources.

use super::inputs::{multilabel_task, require, run_model, with_constant, FeatureSource, ModelTemplate};
use super::{ExperimentError, ReportTable};
use crate::data::{DatasetId, DatasetTable};
use crate::labels::AuVocabulary;
use crate::learn::{RunReport, TrainConfig};
use crate::metrics::MetricName;
use crate::protocols::make_lodo;

#[derive(Debug, Clone)]
pub struct Cd6meOutcome {
    /// Pooled binary F1 per AU over all six folds, plus their mean.
    pub per_au: ReportTable,
    /// Mean over AUs within each held-out dataset, plus the unweighted mean
    /// of the six.
    pub per_dataset: ReportTable,
    pub reports: Vec<(String, RunReport)>,
}

/// Runs every model (the constant floor is always added) on the LODO plan of
/// the six sources.
pub fn study_cd6me(
    tables: &[DatasetTable],
    models: &[ModelTemplate],
    features: &FeatureSource,
    vocab: &AuVocabulary,
    cfg: &TrainConfig,
) -> Result<Cd6meOutcome, ExperimentError> {
    let ordered: Vec<DatasetTable> = require(tables, &DatasetId::CD6ME)?.into_iter().cloned().collect();
    let refs: Vec<&DatasetTable> = ordered.iter().collect();
    let plan = make_lodo(&ordered)?;
    let data = multilabel_task(&refs, features, vocab)?;

    let mut au_cols: Vec<String> = vocab.aus().iter().map(ToString::to_string).collect();
    au_cols.push("Average".into());
    let mut ds_cols: Vec<String> = DatasetId::CD6ME.iter().map(ToString::to_string).collect();
    ds_cols.push("Average".into());
    let mut per_au = ReportTable::new("cd6me-per-au", "Cross-dataset protocol, per AU", "F1_b", au_cols);
    let mut per_dataset = ReportTable::new("cd6me-per-dataset", "Cross-dataset protocol, per held-out dataset", "F1_b", ds_cols);
    let mut reports = Vec::new();

    for m in with_constant(models) {
        let report = run_model(&m, &plan, &data, cfg)?;
        let mut cells: Vec<Option<f64>> =
            vocab.aus().iter().map(|a| report.metric(MetricName::F1Binary, Some(&a.to_string()))).collect();
        cells.push(report.metric(MetricName::F1Macro, None));
        per_au.push(&m.name, cells);

        let folds: Vec<f64> = DatasetId::CD6ME
            .iter()
            .map(|id| {
                let key = id.to_string();
                report.fold_summary.iter().find(|f| f.fold_key == key).expect("one fold per dataset").mean_score
            })
            .collect();
        let avg = folds.iter().sum::<f64>() / folds.len() as f64;
        per_dataset.push(&m.name, folds.into_iter().map(Some).chain([Some(avg)]).collect());
        reports.push((m.name.clone(), report));
    }
    Ok(Cd6meOutcome { per_au, per_dataset, reports })
}
