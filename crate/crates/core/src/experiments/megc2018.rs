// SPDX-License-Identifier: Apache-2.0

//! Objective-class tasks: the two-dataset holdout and composite LOSO tasks,
//! and objective against emotional labels per dataset.

use std::collections::BTreeSet;

use super::inputs::{assert_training_excludes, require, run_model, samples_of, FeatureSource, ModelTemplate};
use super::{ExperimentError, ReportTable};
use crate::data::{DatasetId, DatasetTable, Sample};
use crate::labels::{map_objective, ObjectiveMap};
use crate::learn::{RunReport, TaskData, TrainConfig};
use crate::metrics::MetricName;
use crate::protocols::{make_holdout_multi, make_loso_with_auxiliary, FoldPlan};

/// A sample labelling: class name per sample, or `None` to leave it out.
type Labeller<'a> = dyn Fn(&Sample) -> Option<String> + 'a;

fn objective_labeller(map: &ObjectiveMap) -> impl Fn(&Sample) -> Option<String> + '_ {
    move |s| {
        let c = map_objective(&s.au_set, map);
        (!(map.exclude_fallback && c == map.fallback_index())).then(|| map.classes[c].clone())
    }
}

/// Keeps the samples `label` accepts and whose label is in `classes` (when
/// given). Tables left empty are dropped.
fn filter(tables: &[&DatasetTable], label: &Labeller, classes: Option<&BTreeSet<String>>) -> Result<Vec<DatasetTable>, ExperimentError> {
    let mut out = Vec::new();
    for t in tables {
        let kept: Vec<Sample> = t
            .samples()
            .iter()
            .filter(|s| label(s).is_some_and(|l| classes.is_none_or(|c| c.contains(&l))))
            .cloned()
            .collect();
        if !kept.is_empty() {
            out.push(DatasetTable::new(t.dataset_id().clone(), kept)?);
        }
    }
    Ok(out)
}

fn class_task(
    tables: &[&DatasetTable],
    label: &Labeller,
    class_names: &[String],
    checksum: &str,
    features: &FeatureSource,
) -> Result<TaskData, ExperimentError> {
    let samples = samples_of(tables);
    let x = features.load(&samples)?;
    let classes: Vec<usize> = samples
        .iter()
        .map(|s| {
            let l = label(s).expect("filtered");
            class_names.iter().position(|c| *c == l).expect("class in task")
        })
        .collect();
    Ok(TaskData::multiclass(&samples, &x, &classes, class_names.to_vec(), checksum.to_string())?)
}

fn run_checked(
    m: &ModelTemplate,
    plan: &FoldPlan,
    data: &TaskData,
    cfg: &TrainConfig,
    test: &BTreeSet<String>,
    metric: MetricName,
) -> Result<(f64, RunReport), ExperimentError> {
    assert_training_excludes(plan, data, test)?;
    let r = run_model(m, plan, data, cfg)?;
    Ok((r.metric(metric, None).expect("multiclass metric"), r))
}

#[derive(Debug, Clone)]
pub struct MegcOutcome {
    /// Holdout between the two datasets in both directions, UAR.
    pub task_a: ReportTable,
    /// LOSO on their union, macro F1.
    pub task_b: ReportTable,
    pub reports: Vec<(String, RunReport)>,
}

fn extras<'a>(tables: &'a [DatasetTable], skip: &[DatasetId]) -> Vec<&'a DatasetTable> {
    DatasetId::CD6ME
        .iter()
        .filter(|id| !skip.contains(id))
        .filter_map(|id| tables.iter().find(|t| t.dataset_id() == id))
        .collect()
}

fn row_label(m: &ModelTemplate, extra: bool) -> String {
    if extra {
        format!("{} (extra data)", m.name)
    } else {
        m.name.clone()
    }
}

/// Task A trains on one of CASME II and SAMM and tests on the other; task B
/// runs LOSO on both together. With `extra_data`, a second row per model
/// adds the other available sources to training only.
pub fn study_megc2018(
    tables: &[DatasetTable],
    objective: Option<&ObjectiveMap>,
    extra_data: bool,
    models: &[ModelTemplate],
    features: &FeatureSource,
    cfg: &TrainConfig,
) -> Result<MegcOutcome, ExperimentError> {
    let map = objective.ok_or(ExperimentError::ObjectiveMapMissing)?;
    let pair = [DatasetId::Casme2, DatasetId::Samm];
    let core = require(tables, &pair)?;
    let label = objective_labeller(map);
    let class_names: Vec<String> = map.task_classes().iter().map(|&c| map.classes[c].clone()).collect();
    let checksum = map.checksum();
    let kept = filter(&core, &label, None)?;
    let [c2, sa] = match kept.as_slice() {
        [a, b] => [a.clone(), b.clone()],
        _ => return Err(ExperimentError::MissingLabels("a dataset has no samples in the objective classes".into())),
    };
    let aux = filter(&extras(tables, &pair), &label, None)?;
    if extra_data && aux.is_empty() {
        return Err(ExperimentError::MissingTables(vec!["extra training datasets".into()]));
    }

    let mut task_a = ReportTable::new("megc2018-a", "Holdout-database evaluation", "UAR", vec!["C2→SA".into(), "SA→C2".into(), "Avg".into()]);
    let mut task_b = ReportTable::new("megc2018-b", "Composite-database evaluation", "macro F1", vec!["F1_macro".into()]);
    let mut reports = Vec::new();
    let variants: &[bool] = if extra_data { &[false, true] } else { &[false] };
    for m in models {
        for &extra in variants {
            let name = row_label(m, extra);
            let aux_refs: Vec<&DatasetTable> = if extra { aux.iter().collect() } else { Vec::new() };
            let mut dirs = Vec::new();
            for (train, test) in [(&c2, &sa), (&sa, &c2)] {
                let train_set: Vec<&DatasetTable> = [train].into_iter().chain(aux_refs.iter().copied()).collect();
                let plan = make_holdout_multi(&train_set, test)?;
                let all: Vec<&DatasetTable> = train_set.iter().copied().chain([test]).collect();
                let data = class_task(&all, &label, &class_names, &checksum, features)?;
                let held: BTreeSet<String> = [test.dataset_id().to_string()].into();
                let (v, r) = run_checked(m, &plan, &data, cfg, &held, MetricName::Uar)?;
                dirs.push(v);
                reports.push((format!("{name} {}", plan.folds[0].fold_key), r));
            }
            task_a.push(&name, vec![Some(dirs[0]), Some(dirs[1]), Some((dirs[0] + dirs[1]) / 2.0)]);

            let aux_owned: Vec<DatasetTable> = aux_refs.iter().map(|t| (*t).clone()).collect();
            let plan = make_loso_with_auxiliary(&[c2.clone(), sa.clone()], &aux_owned)?;
            let all: Vec<&DatasetTable> = [&c2, &sa].into_iter().chain(aux_refs.iter().copied()).collect();
            let data = class_task(&all, &label, &class_names, &checksum, features)?;
            // LOSO keeps subjects apart; auxiliary sources must never be tested
            if let Some(start) = plan.auxiliary_start {
                if plan.folds.iter().any(|f| f.test_idx.iter().any(|&i| i >= start)) {
                    return Err(ExperimentError::Leak("auxiliary sample in a test fold".into()));
                }
            }
            let (v, r) = run_checked(m, &plan, &data, cfg, &BTreeSet::new(), MetricName::F1Macro)?;
            task_b.push(&name, vec![Some(v)]);
            reports.push((format!("{name} composite"), r));
        }
    }
    Ok(MegcOutcome { task_a, task_b, reports })
}

/// The five datasets with emotion labels suitable for the comparison.
pub const EMOTION_DATASETS: [DatasetId; 5] =
    [DatasetId::Casme, DatasetId::Casme2, DatasetId::Samm, DatasetId::Mmew, DatasetId::Casme3];

fn emotion_labeller(s: &Sample) -> Option<String> {
    s.emotion.clone()
}

/// LOSO per dataset with objective classes and with emotion labels, macro
/// F1. With `extra_data`, the other datasets join training, restricted to
/// the classes of the dataset under test.
pub fn study_objective_vs_emotion(
    tables: &[DatasetTable],
    objective: Option<&ObjectiveMap>,
    extra_data: bool,
    models: &[ModelTemplate],
    features: &FeatureSource,
    cfg: &TrainConfig,
) -> Result<(ReportTable, Vec<(String, RunReport)>), ExperimentError> {
    let map = objective.ok_or(ExperimentError::ObjectiveMapMissing)?;
    let primary = require(tables, &EMOTION_DATASETS)?;
    let objective_label = objective_labeller(map);
    let columns: Vec<String> = EMOTION_DATASETS.iter().map(ToString::to_string).collect();
    let mut table = ReportTable::new("objective-vs-emotion", "Objective against emotional labels, LOSO", "macro F1", columns);
    let mut reports = Vec::new();
    let variants: &[bool] = if extra_data { &[false, true] } else { &[false] };

    let arms: [(&str, &Labeller); 2] = [("Objective", &objective_label), ("Emotional", &emotion_labeller)];
    for m in models {
        for (arm, label) in arms {
            for &extra in variants {
                let mut cells = Vec::new();
                for (k, t) in primary.iter().enumerate() {
                    let own = filter(&[*t], label, None)?;
                    let Some(own) = own.into_iter().next() else {
                        return Err(ExperimentError::MissingLabels(format!("{}: no {arm} labels", t.dataset_id())));
                    };
                    let present: BTreeSet<String> = own.samples().iter().filter_map(|s| label(s)).collect();
                    let class_names: Vec<String> = if arm == "Objective" {
                        map.classes.iter().filter(|c| present.contains(*c)).cloned().collect()
                    } else {
                        present.iter().cloned().collect()
                    };
                    let others: Vec<&DatasetTable> =
                        if extra { primary.iter().enumerate().filter(|(j, _)| *j != k).map(|(_, t)| *t).collect() } else { Vec::new() };
                    let aux = filter(&others, label, Some(&present))?;
                    let plan = make_loso_with_auxiliary(std::slice::from_ref(&own), &aux)?;
                    let all: Vec<&DatasetTable> = [&own].into_iter().chain(aux.iter()).collect();
                    let checksum = if arm == "Objective" { map.checksum() } else { format!("emotion:{}", t.dataset_id()) };
                    let data = class_task(&all, label, &class_names, &checksum, features)?;
                    let (v, r) = run_checked(m, &plan, &data, cfg, &BTreeSet::new(), MetricName::F1Macro)?;
                    cells.push(Some(v));
                    reports.push((format!("{} {arm} {}", row_label(m, extra), t.dataset_id()), r));
                }
                table.push(format!("{} / {arm}{}", m.name, if extra { " (extra data)" } else { "" }), cells);
            }
        }
    }
    Ok((table, reports))
}
