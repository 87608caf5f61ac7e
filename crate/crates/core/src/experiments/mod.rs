// SPDX-License-Identifier: Apache-2.0

//! One-call studies that turn tables, features and models into report
//! tables, figures and a provenance block.

mod benefit;
mod cd6me;
pub mod constants;
mod emotion;
mod f1_variants;
mod inputs;
mod leak;
mod megc2018;
mod report;

pub use benefit::{study_data_benefit, BenefitOutcome};
pub use cd6me::{study_cd6me, Cd6meOutcome};
pub use emotion::{macro_f1_labels, study_emotion_from_aus, AuPatternClassifier, BoostedStumps, LabelKind};
pub use f1_variants::{class_labels, f1_variants, scripted_folds, study_f1_variants, F1VariantSpec, F1Variants};
pub use inputs::{FeatureSource, ModelTemplate};
pub use leak::{study_leak_bias, ArmSummary, Dominance, LeakBiasOutcome, LeakBiasSpec};
pub use megc2018::{study_megc2018, study_objective_vs_emotion, MegcOutcome, EMOTION_DATASETS};
pub use report::{table_checksum, RankEntry, ReportRow, ReportTable, StudyOutput, StudyProvenance};

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{generate_synthetic, DataError, DatasetId, DatasetTable, SyntheticSpec};
use crate::features::FeatureError;
use crate::labels::{AuVocabulary, LabelError, ObjectiveMap};
use crate::learn::{LearnError, TrainConfig};
use crate::protocols::ProtocolError;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("required tables missing: {}", .0.join(", "))]
    MissingTables(Vec<String>),
    #[error("missing labels: {0}")]
    MissingLabels(String),
    #[error("this study needs an objective class map")]
    ObjectiveMapMissing,
    #[error("test dataset {0} is also a training source")]
    Overlap(String),
    #[error("leak check failed: {0}")]
    Leak(String),
    #[error("run incomplete: {0}")]
    Incomplete(String),
    #[error("features: {0}")]
    Features(String),
    #[error("report: {0}")]
    Report(String),
    #[error(transparent)]
    Learn(#[from] LearnError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Label(#[from] LabelError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StudyKind {
    EmotionFromAus,
    LeakBias,
    F1Variants,
    DataBenefit,
    Cd6meBenchmark,
    #[serde(rename = "megc2018-a")]
    Megc2018A,
    #[serde(rename = "megc2018-b")]
    Megc2018B,
    ObjectiveVsEmotion,
}

impl StudyKind {
    pub const ALL: [StudyKind; 8] = [
        StudyKind::EmotionFromAus,
        StudyKind::LeakBias,
        StudyKind::F1Variants,
        StudyKind::DataBenefit,
        StudyKind::Cd6meBenchmark,
        StudyKind::Megc2018A,
        StudyKind::Megc2018B,
        StudyKind::ObjectiveVsEmotion,
    ];

    /// Studies that run on their own synthetic construction.
    pub fn is_self_contained(self) -> bool {
        matches!(self, StudyKind::LeakBias | StudyKind::F1Variants)
    }
}

impl fmt::Display for StudyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let v = serde_json::to_value(self).expect("unit variant");
        f.write_str(v.as_str().expect("string"))
    }
}

impl std::str::FromStr for StudyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|_| {
            let names: Vec<String> = StudyKind::ALL.iter().map(ToString::to_string).collect();
            format!("unknown study {s:?}; expected one of {}", names.join(", "))
        })
    }
}

fn default_order() -> Vec<DatasetId> {
    vec![DatasetId::Casme, DatasetId::Samm, DatasetId::Mmew, DatasetId::FourDme, DatasetId::Casme3]
}

fn default_test() -> DatasetId {
    DatasetId::Casme2
}

/// Declarative description of one study run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudySpec {
    pub study: StudyKind,
    /// Models to compare; the constant floor plus an MLP when empty.
    #[serde(default)]
    pub models: Vec<ModelTemplate>,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub features: FeatureSource,
    /// Tables to generate when no real tables are supplied.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<SyntheticSpec>,
    #[serde(default = "default_label_kind")]
    pub label_kind: LabelKind,
    /// Adds a boosted-stump column to the emotion-from-AUs study.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stump_rounds: Option<usize>,
    #[serde(default)]
    pub extra_data: bool,
    #[serde(default = "default_test")]
    pub test_dataset: DatasetId,
    #[serde(default = "default_order")]
    pub train_order: Vec<DatasetId>,
    #[serde(default)]
    pub f1_variants: F1VariantSpec,
    #[serde(default)]
    pub leak_bias: LeakBiasSpec,
}

fn default_label_kind() -> LabelKind {
    LabelKind::Emotion
}

impl StudySpec {
    pub fn new(study: StudyKind) -> Self {
        StudySpec {
            study,
            models: Vec::new(),
            train: TrainConfig::default(),
            features: FeatureSource::default(),
            synthetic: None,
            label_kind: default_label_kind(),
            stump_rounds: None,
            extra_data: false,
            test_dataset: default_test(),
            train_order: default_order(),
            f1_variants: F1VariantSpec::default(),
            leak_bias: LeakBiasSpec::default(),
        }
    }

    fn model_list(&self) -> Vec<ModelTemplate> {
        if self.models.is_empty() {
            vec![ModelTemplate::constant(), ModelTemplate::mlp("MLP", vec![64])]
        } else {
            self.models.clone()
        }
    }
}

/// Data the study may draw on; only what a study needs is required.
#[derive(Debug, Clone, Default)]
pub struct StudyInputs {
    pub tables: Vec<DatasetTable>,
    pub objective: Option<ObjectiveMap>,
    pub vocabulary: Option<AuVocabulary>,
}

/// Runs the study `spec` describes.
pub fn run_study(spec: &StudySpec, inputs: &StudyInputs) -> Result<StudyOutput, ExperimentError> {
    let tables: Vec<DatasetTable> = match (&spec.synthetic, inputs.tables.is_empty()) {
        (Some(s), true) => generate_synthetic(s)?,
        _ => inputs.tables.clone(),
    };
    if tables.is_empty() && !spec.study.is_self_contained() {
        return Err(ExperimentError::MissingTables(vec!["no tables supplied".into()]));
    }
    let vocab = inputs.vocabulary.clone().unwrap_or_else(AuVocabulary::cd6me);
    let objective = inputs.objective.as_ref();
    let models = spec.model_list();
    let config = serde_json::to_value(spec).expect("serializable");
    let mut seeds = spec.train.seeds.clone();
    let mut figure = None;
    let mut label_checksums = std::collections::BTreeMap::new();

    let out_tables = match spec.study {
        StudyKind::EmotionFromAus => {
            if spec.label_kind == LabelKind::Objective {
                label_checksums.insert("objective".into(), objective.ok_or(ExperimentError::ObjectiveMapMissing)?.checksum());
            }
            seeds.clear();
            vec![study_emotion_from_aus(&tables, spec.label_kind, objective, spec.stump_rounds)?]
        }
        StudyKind::LeakBias => {
            seeds = spec.leak_bias.train.seeds.clone();
            let out = study_leak_bias(&spec.leak_bias)?;
            figure = Some(out.table.to_svg());
            vec![out.table]
        }
        StudyKind::F1Variants => {
            seeds = vec![spec.f1_variants.seed];
            let (t, _, svg) = study_f1_variants(&spec.f1_variants);
            figure = Some(svg);
            vec![t]
        }
        StudyKind::DataBenefit => {
            label_checksums.insert("vocabulary".into(), vocab.checksum());
            let test = inputs::require(&tables, std::slice::from_ref(&spec.test_dataset))?[0].clone();
            let order: Vec<DatasetTable> = inputs::require(&tables, &spec.train_order)?.into_iter().cloned().collect();
            vec![study_data_benefit(&test, &order, &models, &spec.features, &vocab, &spec.train)?.table]
        }
        StudyKind::Cd6meBenchmark => {
            label_checksums.insert("vocabulary".into(), vocab.checksum());
            let out = study_cd6me(&tables, &models, &spec.features, &vocab, &spec.train)?;
            figure = Some(out.per_dataset.to_svg());
            vec![out.per_au, out.per_dataset]
        }
        StudyKind::Megc2018A | StudyKind::Megc2018B => {
            label_checksums.insert("objective".into(), objective.ok_or(ExperimentError::ObjectiveMapMissing)?.checksum());
            let out = study_megc2018(&tables, objective, spec.extra_data, &models, &spec.features, &spec.train)?;
            if spec.study == StudyKind::Megc2018A {
                vec![out.task_a, out.task_b]
            } else {
                vec![out.task_b, out.task_a]
            }
        }
        StudyKind::ObjectiveVsEmotion => {
            label_checksums.insert("objective".into(), objective.ok_or(ExperimentError::ObjectiveMapMissing)?.checksum());
            vec![study_objective_vs_emotion(&tables, objective, spec.extra_data, &models, &spec.features, &spec.train)?.0]
        }
    };
    let mut provenance = StudyProvenance::new(spec.study, config, seeds, &tables);
    provenance.label_checksums = label_checksums;
    Ok(StudyOutput { study: spec.study, tables: out_tables, provenance, figure })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn study_names_round_trip() {
        for k in StudyKind::ALL {
            assert_eq!(k.to_string().parse::<StudyKind>().unwrap(), k);
        }
        assert_eq!(StudyKind::Megc2018A.to_string(), "megc2018-a");
        assert_eq!(StudyKind::Cd6meBenchmark.to_string(), "cd6me-benchmark");
        assert!("nope".parse::<StudyKind>().is_err());
    }

    #[test]
    fn spec_parses_from_toml_with_defaults() {
        let spec: StudySpec = toml::from_str("study = \"f1-variants\"\n[f1_variants]\nseed = 3\n").unwrap();
        assert_eq!(spec.f1_variants.seed, 3);
        assert_eq!(spec.test_dataset, DatasetId::Casme2);
        assert!(toml::from_str::<StudySpec>("study = \"f1-variants\"\nbogus = 1\n").is_err());
    }

    #[test]
    fn f1_study_writes_all_outputs() {
        let out = run_study(&StudySpec::new(StudyKind::F1Variants), &StudyInputs::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let written = out.write(dir.path()).unwrap();
        let names: Vec<String> = written.iter().map(|p| p.file_name().unwrap().to_string_lossy().into_owned()).collect();
        assert_eq!(names, ["f1-variants.csv", "study.json", "provenance.json", "f1-variants.svg"]);
        let back = StudyOutput::from_json(&std::fs::read_to_string(dir.path().join("study.json")).unwrap()).unwrap();
        assert_eq!(back, out);
    }

    #[test]
    fn real_data_studies_need_tables() {
        let err = run_study(&StudySpec::new(StudyKind::Cd6meBenchmark), &StudyInputs::default());
        assert!(matches!(err, Err(ExperimentError::MissingTables(_))));
    }

    #[test]
    fn studies_are_reproducible() {
        let mut spec = StudySpec::new(StudyKind::Cd6meBenchmark);
        spec.synthetic = Some(SyntheticSpec {
            seed: 1,
            ..{
                let tables = constants::cd6me_marginal_tables(1).unwrap();
                let datasets = tables
                    .iter()
                    .map(|t| crate::data::SyntheticDataset {
                        name: t.dataset_id().to_string(),
                        n_samples: t.len() / 10,
                        n_subjects: 3,
                        au_counts: Default::default(),
                    })
                    .collect();
                SyntheticSpec { seed: 0, datasets, emotion: None, noise_rate: 0.0 }
            }
        });
        spec.models = vec![ModelTemplate::new("logistic", crate::learn::ModelKind::LogisticMultilabel)];
        spec.train.max_epochs = 2;
        spec.train.seeds = vec![0];
        let a = run_study(&spec, &StudyInputs::default()).unwrap();
        let b = run_study(&spec, &StudyInputs::default()).unwrap();
        assert_eq!(a.to_json(), b.to_json());
        assert_eq!(a.tables[0].rows[0].label, "Constant");
        assert_eq!(a.provenance.data_checksums.len(), 6);
    }
}
