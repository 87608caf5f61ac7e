// SPDX-License-Identifier: Apache-2.0

//! Early stopping on test data against the two legal stopping regimes.

use serde::{Deserialize, Serialize};

use super::inputs::{complete, ModelTemplate};
use super::{ExperimentError, ReportTable};
use crate::data::{generate_synthetic, AuCode, DatasetTable, SyntheticDataset, SyntheticSpec};
use crate::features::{synthesize_features, SyntheticFeatureSpec};
use crate::labels::select_aus;
use crate::learn::{run_protocol, RunOptions, RunReport, Stopping, TaskData, TrainConfig};
use crate::metrics::MetricName;
use crate::protocols::{make_loso, AccessMode};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LeakBiasSpec {
    pub data: SyntheticSpec,
    pub features: SyntheticFeatureSpec,
    pub model: ModelTemplate,
    pub train: TrainConfig,
}

impl Default for LeakBiasSpec {
    fn default() -> Self {
        let counts = [(1, 60), (2, 48), (4, 110), (12, 44), (14, 52)]
            .into_iter()
            .map(|(a, c)| (AuCode::new(a).expect("nonzero"), c))
            .collect();
        LeakBiasSpec {
            data: SyntheticSpec {
                seed: 7,
                datasets: vec![SyntheticDataset { name: "leak".into(), n_samples: 240, n_subjects: 20, au_counts: counts }],
                emotion: None,
                noise_rate: 0.0,
            },
            features: SyntheticFeatureSpec { dim: 16, signal: 0.6, noise: 1.0, dataset_shift: 0.0, subject_shift: 0.6, seed: 7 },
            model: ModelTemplate::mlp("MLP", vec![16]),
            train: TrainConfig {
                max_epochs: 30,
                learning_rate: 5e-3,
                weight_decay: 1e-3,
                batch_size: 16,
                seeds: (0..5).collect(),
                ..TrainConfig::default()
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmSummary {
    pub stopping: Stopping,
    /// Pooled macro F1 over AUs, one value per seed.
    pub per_seed: Vec<f64>,
    pub mean: f64,
    pub sd: f64,
}

/// Folds where the score reported for the selected epoch is at least the
/// test score of every epoch of that fold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dominance {
    pub folds: usize,
    pub dominated: usize,
}

#[derive(Debug, Clone)]
pub struct LeakBiasOutcome {
    pub table: ReportTable,
    pub arms: Vec<ArmSummary>,
    pub dominance: Dominance,
    pub reports: Vec<RunReport>,
}

impl LeakBiasOutcome {
    pub fn arm(&self, s: Stopping) -> &ArmSummary {
        self.arms.iter().find(|a| a.stopping == s).expect("all three arms run")
    }
}

pub(crate) fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = if v.len() > 1 { v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (mean, var.sqrt())
}

fn dominance(report: &RunReport) -> Dominance {
    let mut d = Dominance { folds: 0, dominated: 0 };
    for seed in &report.seeds {
        for f in &seed.folds {
            d.folds += 1;
            let best = f.trace.epochs.iter().filter_map(|e| e.test_f1).fold(f64::NEG_INFINITY, f64::max);
            if f.fold_score >= best - 1e-12 {
                d.dominated += 1;
            }
        }
    }
    d
}

/// LOSO on synthetic data with three stopping regimes: ES_TEST (leak-demo
/// access, tainted), ES_VALIDATION and FIXED_EPOCH, all from the same seeds.
pub fn study_leak_bias(spec: &LeakBiasSpec) -> Result<LeakBiasOutcome, ExperimentError> {
    let tables: Vec<DatasetTable> = generate_synthetic(&spec.data)?;
    let samples: Vec<_> = tables.iter().flat_map(|t| t.samples()).collect();
    let vocab = select_aus(&tables, 1, 1);
    let x = synthesize_features(&samples, &spec.features)?;
    let data = TaskData::multilabel(&samples, &x, &vocab)?;
    let plan = make_loso(&tables)?;
    let model = spec.model.instantiate(data.features.cols(), data.n_classes());

    let arms = [
        (Stopping::EsTest, AccessMode::LeakDemo),
        (Stopping::EsValidation, AccessMode::Guarded),
        (Stopping::FixedEpoch, AccessMode::Guarded),
    ];
    let mut reports = Vec::new();
    let mut summaries = Vec::new();
    let mut table = ReportTable::new(
        "leak-bias",
        "Early stopping regimes on synthetic LOSO",
        "pooled F1",
        vec!["F1".into(), "sd".into()],
    );
    table.rank_by = Some(0);
    for (stopping, mode) in arms {
        let cfg = TrainConfig { stopping, ..spec.train.clone() };
        let report = complete(run_protocol(&model, &plan, &data, &cfg, &RunOptions { mode: Some(mode), ..Default::default() })?)?;
        let per_seed: Vec<f64> =
            report.seeds.iter().map(|s| s.metrics.get(MetricName::F1Macro, None).expect("pooled macro F1")).collect();
        let (mean, sd) = mean_sd(&per_seed);
        table.push_row(stopping.to_string(), vec![Some(mean), Some(sd)], report.tainted());
        summaries.push(ArmSummary { stopping, per_seed, mean, sd });
        reports.push(report);
    }
    let dom = dominance(&reports[0]);
    let fixed = summaries[2].mean;
    table.notes.push(format!("ES_TEST selected epoch dominates every epoch in {}/{} folds", dom.dominated, dom.folds));
    table.notes.push(format!("ES_TEST - FIXED_EPOCH: {:+.4}", summaries[0].mean - fixed));
    table.notes.push(format!("ES_VALIDATION - FIXED_EPOCH: {:+.4}", summaries[1].mean - fixed));
    Ok(LeakBiasOutcome { table, arms: summaries, dominance: dom, reports })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learn::ModelKind;

    fn small() -> LeakBiasSpec {
        let mut s = LeakBiasSpec::default();
        s.data.datasets[0].n_samples = 96;
        s.data.datasets[0].n_subjects = 8;
        for c in s.data.datasets[0].au_counts.values_mut() {
            *c = (*c * 2) / 5;
        }
        s.train.max_epochs = 8;
        s.train.seeds = vec![0, 1];
        s
    }

    #[test]
    fn es_test_row_is_tainted_and_dominates() {
        let out = study_leak_bias(&small()).unwrap();
        assert_eq!(out.table.tainted_rows.len(), 1);
        assert_eq!(out.table.tainted_rows[0].label, "ES_TEST");
        assert_eq!(out.table.rows.iter().map(|r| r.label.as_str()).collect::<Vec<_>>(), ["ES_VALIDATION", "FIXED_EPOCH"]);
        assert!(out.reports[0].tainted());
        assert!(!out.reports[1].tainted() && !out.reports[2].tainted());
        assert_eq!(out.dominance.dominated, out.dominance.folds);
        assert_eq!(out.dominance.folds, 16);
    }

    #[test]
    fn training_free_model_gives_identical_arms() {
        let mut s = small();
        s.model = ModelTemplate::constant();
        let out = study_leak_bias(&s).unwrap();
        let m: Vec<f64> = out.arms.iter().map(|a| a.mean).collect();
        assert_eq!(m[0], m[1]);
        assert_eq!(m[1], m[2]);
        assert_eq!(s.model.kind, ModelKind::ConstantPositive);
    }

    #[test]
    fn mean_sd_matches_hand_values() {
        let (m, s) = mean_sd(&[1.0, 2.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s - 1.0).abs() < 1e-15);
    }
}
