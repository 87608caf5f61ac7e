// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;
use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::model::{argmax_rows, threshold};
use super::train::{stream_seed, task_confusion, TaskKind, TestData, TrainData};
use super::{encode_checkpoint, train_fold, Checkpoint, EpochTrace, LearnError, Matrix, ModelSpec, TrainConfig};
use crate::data::Sample;
use crate::labels::{AuVocabulary, LabelMatrix};
use crate::metrics::{
    accumulate, accuracy, f1_binary, f1_macro, f1_micro, f1_weighted, uar, ConfusionCounts, MetricName, MetricTable,
    MetricValue,
};
use crate::protocols::{subject_key, AccessMode, CompletionToken, FoldPlan, LeakVerdict, PlanKeys, SealedTestSet};

pub const REPORT_FORMAT: &str = "mebench-run";
pub const REPORT_VERSION: u32 = 1;

/// Features, targets and identities over a plan's universe.
#[derive(Debug, Clone)]
pub struct TaskData {
    pub sample_ids: Vec<String>,
    pub subjects: Vec<String>,
    pub datasets: Vec<String>,
    pub features: Matrix,
    /// Row-major `n x classes` 0/1 targets.
    pub labels: Vec<u8>,
    pub class_names: Vec<String>,
    pub task: TaskKind,
    /// Checksum of the vocabulary or class map the targets came from.
    pub label_checksum: String,
}

impl TaskData {
    fn identities(samples: &[&Sample]) -> (Vec<String>, Vec<String>, Vec<String>) {
        (
            samples.iter().map(|s| s.sample_id.clone()).collect(),
            samples.iter().map(|s| subject_key(&s.dataset_id, &s.subject_id)).collect(),
            samples.iter().map(|s| s.dataset_id.to_string()).collect(),
        )
    }

    /// Multi-label AU targets over `vocab`.
    pub fn multilabel(samples: &[&Sample], features: &[Vec<f32>], vocab: &AuVocabulary) -> Result<Self, LearnError> {
        let (m, _) = crate::labels::encode_labels(samples.iter().copied(), vocab)?;
        TaskData::from_matrix(samples, features, &m, TaskKind::MultiLabel, vocab.checksum())
    }

    /// Single-label targets; `classes[i]` indexes `class_names`.
    pub fn multiclass(
        samples: &[&Sample],
        features: &[Vec<f32>],
        classes: &[usize],
        class_names: Vec<String>,
        checksum: String,
    ) -> Result<Self, LearnError> {
        let mut m = LabelMatrix::one_hot(classes, class_names.len())?;
        m = LabelMatrix::from_rows(
            AuVocabulary::new("classes", m.vocab().aus().to_vec())?,
            (0..m.rows()).map(|r| m.row(r).to_vec()).collect(),
        )?;
        let mut d = TaskData::from_matrix(samples, features, &m, TaskKind::MultiClass, checksum)?;
        d.class_names = class_names;
        Ok(d)
    }

    fn from_matrix(
        samples: &[&Sample],
        features: &[Vec<f32>],
        m: &LabelMatrix,
        task: TaskKind,
        label_checksum: String,
    ) -> Result<Self, LearnError> {
        if features.len() != samples.len() || m.rows() != samples.len() {
            return Err(LearnError::Shape(format!(
                "{} samples, {} feature rows, {} label rows",
                samples.len(),
                features.len(),
                m.rows()
            )));
        }
        let (sample_ids, subjects, datasets) = TaskData::identities(samples);
        Ok(TaskData {
            sample_ids,
            subjects,
            datasets,
            features: Matrix::from_rows(features)?,
            labels: m.as_slice().to_vec(),
            class_names: m.vocab().aus().iter().map(ToString::to_string).collect(),
            task,
            label_checksum,
        })
    }

    pub fn len(&self) -> usize {
        self.sample_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sample_ids.is_empty()
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    fn label_rows(&self, idx: &[usize]) -> Vec<u8> {
        let c = self.n_classes();
        idx.iter().flat_map(|&i| self.labels[i * c..(i + 1) * c].iter().copied()).collect()
    }

    pub fn plan_keys(&self) -> PlanKeys {
        PlanKeys { datasets: self.datasets.clone(), subjects: self.subjects.clone() }
    }

    /// SHA-256 over ids, feature bits and labels.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        for id in &self.sample_ids {
            h.update(id.as_bytes());
            h.update([0]);
        }
        for x in self.features.as_slice() {
            h.update(x.to_le_bytes());
        }
        h.update(&self.labels);
        hex::encode(h.finalize())
    }

    fn describe(&self, row: &[u8]) -> String {
        let names: Vec<&str> =
            row.iter().zip(&self.class_names).filter(|(&b, _)| b == 1).map(|(_, n)| n.as_str()).collect();
        if names.is_empty() {
            "-".into()
        } else {
            names.join("+")
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub mode: Option<AccessMode>,
    /// Write the selected checkpoint of every fold here.
    pub checkpoint_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRow {
    pub sample_id: String,
    pub predicted: String,
    pub truth: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold_key: String,
    pub selected_epoch: usize,
    /// Mean per-class F1 inside this fold.
    pub fold_score: f64,
    pub confusion: ConfusionCounts,
    pub predictions: Vec<PredictionRow>,
    pub trace: EpochTrace,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedResult {
    pub seed: u64,
    pub folds: Vec<FoldResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pooled: Option<ConfusionCounts>,
    pub metrics: MetricTable,
    /// Set when a fold failed; the seed's metrics are then absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partial: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldSummary {
    pub fold_key: String,
    /// Mean over complete seeds of the fold score.
    pub mean_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub code_version: String,
    pub label_checksum: String,
    pub data_digest: String,
    pub plan_digest: String,
    pub class_names: Vec<String>,
    pub task: TaskKind,
    pub mode: AccessMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub format: String,
    pub version: u32,
    /// `None` for external predictions.
    pub model: Option<ModelSpec>,
    pub config: TrainConfig,
    pub plan: FoldPlan,
    pub provenance: Provenance,
    pub seeds: Vec<SeedResult>,
    /// Mean over complete seeds.
    pub metrics: MetricTable,
    pub fold_summary: Vec<FoldSummary>,
    pub complete: bool,
    pub verdict: LeakVerdict,
}

impl RunReport {
    pub fn tainted(&self) -> bool {
        !self.verdict.clean
    }

    /// Eligible for a rankings section: clean, complete, rankable protocol.
    pub fn rankable(&self) -> bool {
        self.verdict.clean && self.complete && self.plan.rankable
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("serializable");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, LearnError> {
        let r: RunReport = serde_json::from_str(text).map_err(|e| LearnError::Report(e.to_string()))?;
        if r.format != REPORT_FORMAT || r.version != REPORT_VERSION {
            return Err(LearnError::Report(format!("unsupported report {} v{}", r.format, r.version)));
        }
        Ok(r)
    }

    /// Verdict recomputed from the stored per-fold logs.
    pub fn audit(&self) -> LeakVerdict {
        LeakVerdict::new(self.verdict.mode, self.verdict.violations.clone())
    }

    pub fn metric(&self, name: MetricName, class: Option<&str>) -> Option<f64> {
        self.metrics.get(name, class)
    }
}

fn plan_digest(plan: &FoldPlan) -> String {
    hex::encode(Sha256::digest(serde_json::to_vec(plan).expect("serializable")))
}

fn check_plan(plan: &FoldPlan, data: &TaskData) -> Result<(), LearnError> {
    if plan.universe != data.len() {
        return Err(LearnError::Plan(format!("plan universe {} but {} samples", plan.universe, data.len())));
    }
    let v = plan.violations(&data.plan_keys());
    if let Some(first) = v.first() {
        return Err(LearnError::Plan(first.clone()));
    }
    Ok(())
}

struct FoldRun {
    result: Result<FoldResult, String>,
    verdict: LeakVerdict,
}

fn score_fold(data: &TaskData, test_idx: &[usize], raw: &Matrix, fold_key: &str, selected_epoch: usize, trace: EpochTrace) -> Result<FoldResult, LearnError> {
    let y = data.label_rows(test_idx);
    let confusion = task_confusion(raw, &y, data.task, Some(&data.class_names))?;
    let c = data.n_classes();
    let predicted: Vec<u8> = match data.task {
        TaskKind::MultiLabel => threshold(raw),
        TaskKind::MultiClass => argmax_rows(raw).into_iter().flat_map(|k| (0..c).map(move |j| u8::from(j == k))).collect(),
    };
    let predictions = test_idx
        .iter()
        .enumerate()
        .map(|(r, &i)| PredictionRow {
            sample_id: data.sample_ids[i].clone(),
            predicted: data.describe(&predicted[r * c..(r + 1) * c]),
            truth: data.describe(&y[r * c..(r + 1) * c]),
        })
        .collect();
    Ok(FoldResult { fold_key: fold_key.to_string(), selected_epoch, fold_score: f1_macro(&confusion), confusion, predictions, trace })
}

fn run_one(
    spec: &ModelSpec,
    plan: &FoldPlan,
    data: &TaskData,
    cfg: &TrainConfig,
    mode: AccessMode,
    seed: u64,
    k: usize,
    ckpt: &Option<PathBuf>,
) -> FoldRun {
    let fold = &plan.folds[k];
    let train = TrainData {
        x: data.features.select_rows(&fold.train_idx),
        y: data.label_rows(&fold.train_idx),
        subjects: fold.train_idx.iter().map(|&i| data.subjects[i].clone()).collect(),
    };
    let test = TestData { x: data.features.select_rows(&fold.test_idx), y: data.label_rows(&fold.test_idx) };
    let mut sealed = SealedTestSet::seal(fold.fold_key.clone(), test, mode);
    let prefix = format!("seed{seed}/{}", fold.fold_key);
    let result = train_fold(spec, &train, cfg, &mut sealed, data.task, stream_seed(seed, k, 0), &prefix)
        .and_then(|out| {
            if let Some(dir) = ckpt {
                let blob = encode_checkpoint(&Checkpoint { seed, fold: k as u32, epoch: out.selected_epoch as u32, params: out.params.clone() });
                std::fs::write(dir.join(format!("seed{seed}_fold{k}_epoch{}.mebc", out.selected_epoch)), blob)?;
            }
            score_fold(data, &fold.test_idx, &out.raw, &fold.fold_key, out.selected_epoch, out.trace)
        })
        .map_err(|e| format!("fold {}: {e}", fold.fold_key));
    FoldRun { result, verdict: sealed.audit() }
}

fn seed_metrics(data: &TaskData, folds: &[FoldResult]) -> Result<(ConfusionCounts, MetricTable), LearnError> {
    let confusions: Vec<ConfusionCounts> = folds.iter().map(|f| f.confusion.clone()).collect();
    let pooled = accumulate(&confusions)?;
    let mut t = MetricTable::default();
    for (name, counts) in data.class_names.iter().zip(pooled.classes()) {
        t.push(MetricValue::pooled(MetricName::F1Binary, Some(name.clone()), f1_binary(counts)));
    }
    t.push(MetricValue::pooled(MetricName::F1Macro, None, f1_macro(&pooled)));
    t.push(MetricValue::pooled(MetricName::F1Micro, None, f1_micro(&pooled)));
    t.push(MetricValue::pooled(MetricName::F1Weighted, None, f1_weighted(&pooled)));
    if data.task == TaskKind::MultiClass {
        t.push(MetricValue::pooled(MetricName::Uar, None, uar(&pooled).value));
        t.push(MetricValue::pooled(MetricName::Accuracy, None, accuracy(&pooled)));
    }
    let fold_mean = folds.iter().map(|f| f.fold_score).sum::<f64>() / folds.len() as f64;
    t.push(MetricValue::fold_averaged(MetricName::F1MacroFolds, None, fold_mean));
    Ok((pooled, t))
}

fn mean_tables(tables: &[&MetricTable]) -> MetricTable {
    let Some(first) = tables.first() else {
        return MetricTable::default();
    };
    let mut out = (*first).clone();
    for (i, v) in out.values.iter_mut().enumerate() {
        v.value = tables.iter().map(|t| t.values[i].value).sum::<f64>() / tables.len() as f64;
    }
    out
}

fn assemble(
    model: Option<ModelSpec>,
    cfg: &TrainConfig,
    plan: &FoldPlan,
    data: &TaskData,
    mode: AccessMode,
    runs: Vec<(u64, Vec<FoldRun>)>,
) -> RunReport {
    let mut seeds = Vec::new();
    let mut verdicts = Vec::new();
    for (seed, folds) in runs {
        let mut ok = Vec::new();
        let mut partial = None;
        for f in folds {
            verdicts.push(f.verdict);
            match f.result {
                Ok(r) => ok.push(r),
                Err(e) => {
                    partial.get_or_insert(e);
                }
            }
        }
        let (pooled, metrics) = match (&partial, seed_metrics(data, &ok)) {
            (None, Ok((p, m))) => (Some(p), m),
            (None, Err(e)) => {
                partial = Some(e.to_string());
                (None, MetricTable::default())
            }
            (Some(_), _) => (None, MetricTable::default()),
        };
        seeds.push(SeedResult { seed, folds: ok, pooled, metrics, partial });
    }
    let complete_seeds: Vec<&SeedResult> = seeds.iter().filter(|s| s.partial.is_none()).collect();
    let metrics = mean_tables(&complete_seeds.iter().map(|s| &s.metrics).collect::<Vec<_>>());
    let fold_summary = plan
        .folds
        .iter()
        .enumerate()
        .map(|(k, f)| FoldSummary {
            fold_key: f.fold_key.clone(),
            mean_score: if complete_seeds.is_empty() {
                0.0
            } else {
                complete_seeds.iter().map(|s| s.folds[k].fold_score).sum::<f64>() / complete_seeds.len() as f64
            },
        })
        .collect();
    let mut verdict = LeakVerdict::combine(&verdicts);
    if mode == AccessMode::LeakDemo {
        verdict = LeakVerdict::new(AccessMode::LeakDemo, verdict.violations);
    }
    RunReport {
        format: REPORT_FORMAT.into(),
        version: REPORT_VERSION,
        model,
        config: cfg.clone(),
        plan: plan.clone(),
        provenance: Provenance {
            code_version: env!("CARGO_PKG_VERSION").into(),
            label_checksum: data.label_checksum.clone(),
            data_digest: data.digest(),
            plan_digest: plan_digest(plan),
            class_names: data.class_names.clone(),
            task: data.task,
            mode,
        },
        complete: seeds.iter().all(|s| s.partial.is_none()),
        seeds,
        metrics,
        fold_summary,
        verdict,
    }
}

/// Trains every fold of `plan` for every seed of `cfg` and pools the test
/// predictions of each seed into one confusion table. Reported metrics are
/// the mean over seeds. Folds and seeds run in parallel; results do not
/// depend on scheduling.
pub fn run_protocol(
    spec: &ModelSpec,
    plan: &FoldPlan,
    data: &TaskData,
    cfg: &TrainConfig,
    opts: &RunOptions,
) -> Result<RunReport, LearnError> {
    let mode = opts.mode.unwrap_or(AccessMode::Guarded);
    spec.validate()?;
    cfg.validate(mode)?;
    check_plan(plan, data)?;
    if spec.output_dim != data.n_classes() {
        return Err(LearnError::Spec(format!("model outputs {} but task has {} classes", spec.output_dim, data.n_classes())));
    }
    if let Some(dir) = &opts.checkpoint_dir {
        std::fs::create_dir_all(dir)?;
    }
    let jobs: Vec<(usize, usize)> =
        (0..cfg.seeds.len()).flat_map(|s| (0..plan.folds.len()).map(move |k| (s, k))).collect();
    let mut results: Vec<FoldRun> = jobs
        .par_iter()
        .map(|&(s, k)| run_one(spec, plan, data, cfg, mode, cfg.seeds[s], k, &opts.checkpoint_dir))
        .collect();
    let mut runs = Vec::new();
    for &seed in cfg.seeds.iter().rev() {
        let rest = results.split_off(results.len() - plan.folds.len());
        runs.push((seed, rest));
    }
    runs.reverse();
    Ok(assemble(Some(spec.clone()), cfg, plan, data, mode, runs))
}

/// Raw scores per sample id, as read from an external predictions file.
pub type ExternalScores = BTreeMap<String, Vec<f64>>;

/// Parses `sample_id,<class 1>,...,<class C>` with a header row.
pub fn read_predictions_csv(text: &str, n_classes: usize) -> Result<ExternalScores, LearnError> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let mut out = BTreeMap::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| LearnError::Predictions(e.to_string()))?;
        if rec.len() != n_classes + 1 {
            return Err(LearnError::Predictions(format!("row {}: {} columns, expected {}", line + 2, rec.len(), n_classes + 1)));
        }
        let scores = rec
            .iter()
            .skip(1)
            .map(|v| v.parse::<f64>().map_err(|_| LearnError::Predictions(format!("row {}: bad score '{v}'", line + 2))))
            .collect::<Result<Vec<_>, _>>()?;
        if out.insert(rec[0].to_string(), scores).is_some() {
            return Err(LearnError::Predictions(format!("duplicate sample id {}", &rec[0])));
        }
    }
    Ok(out)
}

/// Scores externally produced raw outputs on `plan` in place of training.
pub fn run_external(plan: &FoldPlan, data: &TaskData, scores: &ExternalScores) -> Result<RunReport, LearnError> {
    check_plan(plan, data)?;
    let c = data.n_classes();
    let folds = plan
        .folds
        .iter()
        .map(|fold| {
            let test = TestData { x: Matrix::zeros(0, 0), y: data.label_rows(&fold.test_idx) };
            let mut sealed = SealedTestSet::seal(fold.fold_key.clone(), test, AccessMode::Guarded);
            sealed.unseal(Some(CompletionToken::issue(&fold.fold_key))).expect("fresh set");
            let result = (|| {
                let mut raw = Vec::with_capacity(fold.test_idx.len() * c);
                for &i in &fold.test_idx {
                    let id = &data.sample_ids[i];
                    let s = scores.get(id).ok_or_else(|| LearnError::Predictions(format!("no scores for {id}")))?;
                    if s.len() != c {
                        return Err(LearnError::Predictions(format!("{id}: {} scores, expected {c}", s.len())));
                    }
                    raw.extend_from_slice(s);
                }
                let raw = Matrix::new(fold.test_idx.len(), c, raw)?;
                score_fold(data, &fold.test_idx, &raw, &fold.fold_key, 0, EpochTrace::default())
            })()
            .map_err(|e| format!("fold {}: {e}", fold.fold_key));
            FoldRun { result, verdict: sealed.audit() }
        })
        .collect();
    let cfg = TrainConfig { seeds: vec![0], ..Default::default() };
    Ok(assemble(None, &cfg, plan, data, AccessMode::Guarded, vec![(0, folds)]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, AuCode, DatasetTable, SyntheticSpec};
    use crate::features::{synthesize_features, SyntheticFeatureSpec};
    use crate::learn::{ModelKind, Stopping};
    use crate::protocols::{make_lodo, make_loso};

    fn setup(seed: u64) -> (Vec<DatasetTable>, TaskData, AuVocabulary) {
        let counts = [(1u16, 30usize), (4, 45), (12, 20)]
            .into_iter()
            .map(|(a, n)| (AuCode::new(a).unwrap(), n))
            .collect();
        let spec = SyntheticSpec::composite(90, &counts, 6, 2, seed).unwrap();
        let tables = generate_synthetic(&spec).unwrap();
        let vocab = AuVocabulary::new("t", counts.keys().copied().collect()).unwrap();
        let samples: Vec<&Sample> = tables.iter().flat_map(|t| t.samples()).collect();
        let feats = synthesize_features(&samples, &SyntheticFeatureSpec { dim: 8, ..Default::default() }).unwrap();
        let data = TaskData::multilabel(&samples, &feats, &vocab).unwrap();
        (tables, data, vocab)
    }

    fn quick(stopping: Stopping) -> TrainConfig {
        TrainConfig { max_epochs: 4, learning_rate: 0.02, seeds: vec![1, 2], stopping, ..Default::default() }
    }

    #[test]
    fn constant_positive_is_seed_independent() {
        let (tables, data, vocab) = setup(0);
        let plan = make_lodo(&tables).unwrap();
        let spec = ModelSpec::new(ModelKind::ConstantPositive, 8, vocab.len());
        let r = run_protocol(&spec, &plan, &data, &quick(Stopping::FixedEpoch), &RunOptions::default()).unwrap();
        assert!(r.complete && r.verdict.clean && r.rankable());
        assert_eq!(r.seeds[0].metrics, r.seeds[1].metrics);
        // pooled constant-positive F1 per AU is 2P/(P+N)
        for (au, p) in [("AU1", 30.0), ("AU4", 45.0), ("AU12", 20.0)] {
            let f = r.metric(MetricName::F1Binary, Some(au)).unwrap();
            assert!((f - 2.0 * p / (p + 90.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn reports_are_byte_identical() {
        let (tables, data, vocab) = setup(3);
        let plan = make_loso(&tables).unwrap();
        let spec = ModelSpec::mlp(8, vec![6], vocab.len());
        let cfg = quick(Stopping::EsValidation);
        let a = run_protocol(&spec, &plan, &data, &cfg, &RunOptions::default()).unwrap().to_json();
        let b = run_protocol(&spec, &plan, &data, &cfg, &RunOptions::default()).unwrap().to_json();
        assert_eq!(a, b);
        let back = RunReport::from_json(&a).unwrap();
        assert_eq!(back.to_json(), a);
        assert_eq!(back.audit(), back.verdict);
    }

    #[test]
    fn leak_demo_taints_and_guarded_refuses() {
        let (tables, data, vocab) = setup(4);
        let plan = make_lodo(&tables).unwrap();
        let spec = ModelSpec::new(ModelKind::LogisticMultilabel, 8, vocab.len());
        let cfg = quick(Stopping::EsTest);
        assert!(matches!(
            run_protocol(&spec, &plan, &data, &cfg, &RunOptions::default()),
            Err(LearnError::LeakRefused)
        ));
        let opts = RunOptions { mode: Some(AccessMode::LeakDemo), ..Default::default() };
        let r = run_protocol(&spec, &plan, &data, &cfg, &opts).unwrap();
        assert!(r.tainted() && !r.rankable());
        assert_eq!(r.verdict.violations.len(), 2 * 2 * 4);
    }

    #[test]
    fn fold_average_is_stamped() {
        let (tables, data, vocab) = setup(5);
        let plan = make_lodo(&tables).unwrap();
        let spec = ModelSpec::new(ModelKind::ConstantPositive, 8, vocab.len());
        let r = run_protocol(&spec, &plan, &data, &quick(Stopping::FixedEpoch), &RunOptions::default()).unwrap();
        let v = r.metrics.values.iter().find(|v| v.name == MetricName::F1MacroFolds).unwrap();
        assert!(!v.rankable());
        let mean = r.fold_summary.iter().map(|f| f.mean_score).sum::<f64>() / r.fold_summary.len() as f64;
        assert!((v.value - mean).abs() < 1e-12);
    }

    #[test]
    fn external_predictions() {
        let (tables, data, _) = setup(6);
        let plan = make_lodo(&tables).unwrap();
        let mut csv = String::from("sample_id,AU1,AU4,AU12\n");
        for id in &data.sample_ids {
            csv.push_str(&format!("{id},1,1,1\n"));
        }
        let scores = read_predictions_csv(&csv, 3).unwrap();
        let ext = run_external(&plan, &data, &scores).unwrap();
        let spec = ModelSpec::new(ModelKind::ConstantPositive, 8, 3);
        let cfg = TrainConfig { seeds: vec![0], ..Default::default() };
        let own = run_protocol(&spec, &plan, &data, &cfg, &RunOptions::default()).unwrap();
        assert_eq!(ext.metrics, own.metrics);
        assert!(read_predictions_csv("sample_id,a\nx,1,2\n", 1).is_err());
        let mut missing = scores.clone();
        missing.pop_first();
        assert!(!run_external(&plan, &data, &missing).unwrap().complete);
    }

    #[test]
    fn mismatched_plan_is_rejected() {
        let (tables, data, vocab) = setup(7);
        let plan = make_loso(&tables[..1]).unwrap();
        let spec = ModelSpec::new(ModelKind::ConstantPositive, 8, vocab.len());
        let r = run_protocol(&spec, &plan, &data, &quick(Stopping::FixedEpoch), &RunOptions::default());
        assert!(matches!(r, Err(LearnError::Plan(_))));
    }

}
