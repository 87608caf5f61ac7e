// SPDX-License-Identifier: Apache-2.0

//! Test on one dataset while training sources are added one at a time.

use std::collections::BTreeMap;

use super::inputs::{run_model, FeatureSource, ModelTemplate};
use super::{ExperimentError, ReportTable};
use crate::data::{DatasetTable, Sample};
use crate::labels::AuVocabulary;
use crate::learn::{RunReport, TaskData, TrainConfig};
use crate::metrics::MetricName;
use crate::protocols::make_holdout_multi;

#[derive(Debug, Clone)]
pub struct BenefitOutcome {
    pub table: ReportTable,
    /// `(model, column, report)` for every cell.
    pub reports: Vec<(String, String, RunReport)>,
}

/// Column `k` trains on the first `k + 1` tables of `train_order` and tests
/// on `test`; each cell is the pooled mean over AUs of binary F1.
pub fn study_data_benefit(
    test: &DatasetTable,
    train_order: &[DatasetTable],
    models: &[ModelTemplate],
    features: &FeatureSource,
    vocab: &AuVocabulary,
    cfg: &TrainConfig,
) -> Result<BenefitOutcome, ExperimentError> {
    if let Some(t) = train_order.iter().find(|t| t.dataset_id() == test.dataset_id()) {
        return Err(ExperimentError::Overlap(t.dataset_id().to_string()));
    }
    if train_order.is_empty() {
        return Err(ExperimentError::MissingTables(vec!["at least one training table".into()]));
    }
    let columns: Vec<String> = train_order
        .iter()
        .enumerate()
        .map(|(i, t)| if i == 0 { t.dataset_id().to_string() } else { format!("+{}", t.dataset_id()) })
        .collect();

    // every sample's features once; each cell picks its universe from these
    let all: Vec<&Sample> = train_order.iter().chain([test]).flat_map(|t| t.samples()).collect();
    let x = features.load(&all)?;
    let by_id: BTreeMap<&str, &Vec<f32>> = all.iter().map(|s| s.sample_id.as_str()).zip(&x).collect();

    let mut table = ReportTable::new(
        "data-benefit",
        format!("Training on more sources, testing on {}", test.dataset_id()),
        "F1_b",
        columns.clone(),
    );
    let mut reports = Vec::new();
    for m in models {
        let mut cells = Vec::with_capacity(columns.len());
        for (k, col) in columns.iter().enumerate() {
            let train: Vec<&DatasetTable> = train_order[..=k].iter().collect();
            let plan = make_holdout_multi(&train, test)?;
            let samples: Vec<&Sample> = train.iter().copied().chain([test]).flat_map(|t| t.samples()).collect();
            let rows: Vec<Vec<f32>> = samples.iter().map(|s| by_id[s.sample_id.as_str()].clone()).collect();
            let data = TaskData::multilabel(&samples, &rows, vocab)?;
            let report = run_model(m, &plan, &data, cfg)?;
            cells.push(report.metric(MetricName::F1Macro, None));
            reports.push((m.name.clone(), col.clone(), report));
        }
        table.push(m.name.clone(), cells);
    }
    Ok(BenefitOutcome { table, reports })
}
