// SPDX-License-Identifier: Apache-2.0

use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::{argmax_rows, threshold};
use super::{adam_step, AdamState, LearnError, Matrix, ModelSpec};
use crate::metrics::{f1_macro, ConfusionCounts};
use crate::protocols::{validation_split, AccessMode, CompletionToken, SealedTestSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Stopping {
    FixedEpoch,
    /// Model selection on test F1. Leaks by construction; leak-demo only.
    EsTest,
    EsValidation,
}

impl fmt::Display for Stopping {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stopping::FixedEpoch => "FIXED_EPOCH",
            Stopping::EsTest => "ES_TEST",
            Stopping::EsValidation => "ES_VALIDATION",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub max_epochs: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub stopping: Stopping,
    pub val_fraction: f64,
    pub seeds: Vec<u64>,
    /// Standardize features with statistics of the training side only.
    pub standardize: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            max_epochs: 50,
            learning_rate: 1e-4,
            weight_decay: 1e-3,
            batch_size: 32,
            stopping: Stopping::FixedEpoch,
            val_fraction: 0.2,
            seeds: (0..5).collect(),
            standardize: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self, mode: AccessMode) -> Result<(), LearnError> {
        if self.seeds.is_empty() {
            return Err(LearnError::Config("seeds must not be empty".into()));
        }
        if self.max_epochs == 0 || self.batch_size == 0 {
            return Err(LearnError::Config("max_epochs and batch_size must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) || !(self.weight_decay >= 0.0) {
            return Err(LearnError::Config("learning_rate must be positive, weight_decay non-negative".into()));
        }
        if self.stopping == Stopping::EsValidation && !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return Err(LearnError::Config("val_fraction must lie in (0, 1)".into()));
        }
        if self.stopping == Stopping::EsTest && mode == AccessMode::Guarded {
            return Err(LearnError::LeakRefused);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskKind {
    /// Independent binary output per AU, threshold at 0.
    MultiLabel,
    /// One-hot targets; prediction is the row argmax.
    MultiClass,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub val_f1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_f1: Option<f64>,
    pub checkpoint: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EpochTrace {
    pub epochs: Vec<EpochRecord>,
}

impl EpochTrace {
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["epoch", "train_loss", "val_f1", "test_f1", "checkpoint"]).expect("memory");
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
        for e in &self.epochs {
            w.write_record([
                e.epoch.to_string(),
                format!("{:.6}", e.train_loss),
                opt(e.val_f1),
                opt(e.test_f1),
                e.checkpoint.clone(),
            ])
            .expect("memory");
        }
        String::from_utf8(w.into_inner().expect("memory")).expect("utf-8")
    }
}

/// Earliest epoch (1-based) with the largest score.
pub fn select_best(scores: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &s) in scores.iter().enumerate() {
        if best.is_none_or(|(_, b)| s > b) {
            best = Some((i, s));
        }
    }
    best.map(|(i, _)| i + 1)
}

/// Hidden side of a fold.
#[derive(Debug, Clone)]
pub struct TestData {
    pub x: Matrix,
    /// Row-major `n x C` targets.
    pub y: Vec<u8>,
}

/// Visible side of a fold.
#[derive(Debug, Clone)]
pub struct TrainData {
    pub x: Matrix,
    pub y: Vec<u8>,
    /// Namespaced subject per row, for the validation split.
    pub subjects: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct FoldOutcome {
    pub raw: Matrix,
    pub trace: EpochTrace,
    pub selected_epoch: usize,
    pub params: Vec<f64>,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stream seed for (run seed, fold index, purpose). A pure function of its
/// arguments, so folds can run in any order or in parallel.
pub fn stream_seed(seed: u64, fold: usize, purpose: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(seed) ^ fold as u64) ^ purpose)
}

/// Score used for model selection and per-fold reporting: mean per-class F1.
pub fn task_score(raw: &Matrix, y: &[u8], task: TaskKind) -> Result<f64, LearnError> {
    Ok(f1_macro(&task_confusion(raw, y, task, None)?))
}

pub fn task_confusion(raw: &Matrix, y: &[u8], task: TaskKind, labels: Option<&[String]>) -> Result<ConfusionCounts, LearnError> {
    let c = raw.cols();
    let labels = labels.map(<[String]>::to_vec).unwrap_or_else(|| (0..c).map(|i| i.to_string()).collect());
    Ok(match task {
        TaskKind::MultiLabel => ConfusionCounts::from_multilabel(&threshold(raw), y, labels)?,
        TaskKind::MultiClass => {
            let truth = argmax_rows(&Matrix::new(raw.rows(), c, y.iter().map(|&b| b as f64).collect())?);
            ConfusionCounts::from_multiclass(&argmax_rows(raw), &truth, labels)?
        }
    })
}

fn standardized(x: &Matrix, moments: &Option<(Vec<f64>, Vec<f64>)>) -> Matrix {
    let mut x = x.clone();
    if let Some((m, s)) = moments {
        x.standardize(m, s);
    }
    x
}

/// Trains one fold and predicts its test side.
///
/// The test set stays sealed for the whole loop. Under `ES_TEST` it is read
/// once per epoch, which the set logs; in guarded mode such reads fail.
/// Afterwards the trainer issues the completion token, unseals, and the
/// selected checkpoint predicts.
pub fn train_fold(
    spec: &ModelSpec,
    train: &TrainData,
    cfg: &TrainConfig,
    sealed: &mut SealedTestSet<TestData>,
    task: TaskKind,
    stream: u64,
    checkpoint_prefix: &str,
) -> Result<FoldOutcome, LearnError> {
    spec.validate()?;
    cfg.validate(sealed.mode())?;
    let c = spec.output_dim;
    if train.y.len() != train.x.rows() * c || train.subjects.len() != train.x.rows() {
        return Err(LearnError::Shape("training rows, labels and subjects disagree".into()));
    }
    if train.x.rows() == 0 {
        return Err(LearnError::EmptyTraining);
    }
    let moments = cfg.standardize.then(|| train.x.column_moments());
    let x_all = standardized(&train.x, &moments);

    let all: Vec<usize> = (0..train.x.rows()).collect();
    let (fit_idx, val_idx) = if cfg.stopping == Stopping::EsValidation {
        let (t, v) = validation_split(&all, &train.subjects, cfg.val_fraction, stream_seed(stream, 0, 2))
            .map_err(|_| LearnError::EmptyValidation)?;
        (t, Some(v))
    } else {
        (all, None)
    };
    let rows = |idx: &[usize]| -> (Matrix, Vec<u8>) {
        let y = idx.iter().flat_map(|&i| train.y[i * c..(i + 1) * c].iter().copied()).collect();
        (x_all.select_rows(idx), y)
    };
    let (x_fit, y_fit) = rows(&fit_idx);
    let val = val_idx.as_deref().map(rows);

    let mut params = spec.init(stream_seed(stream, 0, 0));
    let mut adam = AdamState::new(params.len());
    let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(stream, 0, 1));
    let mut order: Vec<usize> = (0..x_fit.rows()).collect();
    let mut trace = EpochTrace::default();
    let mut best: Option<(f64, usize, Vec<f64>)> = None;

    for epoch in 1..=cfg.max_epochs {
        let mut loss_sum = 0.0;
        if spec.is_trainable() {
            order.shuffle(&mut rng);
            for batch in order.chunks(cfg.batch_size) {
                let xb = x_fit.select_rows(batch);
                let yb: Vec<u8> = batch.iter().flat_map(|&i| y_fit[i * c..(i + 1) * c].iter().copied()).collect();
                let (l, g) = spec.loss_and_grad(&params, &xb, &yb)?;
                adam_step(&mut params, &g, &mut adam, cfg.learning_rate, cfg.weight_decay)?;
                loss_sum += l * batch.len() as f64;
            }
            loss_sum /= x_fit.rows() as f64;
        } else {
            loss_sum = spec.loss(&params, &x_fit, &y_fit)?;
        }
        let val_f1 = match &val {
            Some((xv, yv)) => Some(task_score(&spec.forward(&params, xv)?, yv, task)?),
            None => None,
        };
        let test_f1 = if cfg.stopping == Stopping::EsTest {
            let test = sealed.read(&format!("epoch {epoch}: test F1 for early stopping"))?;
            let xt = standardized(&test.x, &moments);
            Some(task_score(&spec.forward(&params, &xt)?, &test.y, task)?)
        } else {
            None
        };
        let score = match cfg.stopping {
            Stopping::FixedEpoch => None,
            Stopping::EsValidation => val_f1,
            Stopping::EsTest => test_f1,
        };
        if let Some(s) = score {
            if best.as_ref().is_none_or(|(b, _, _)| s > *b) {
                best = Some((s, epoch, params.clone()));
            }
        }
        trace.epochs.push(EpochRecord {
            epoch,
            train_loss: loss_sum,
            val_f1,
            test_f1,
            checkpoint: format!("{checkpoint_prefix}/epoch{epoch}"),
        });
    }

    let (selected_epoch, params) = match best {
        Some((_, e, p)) => (e, p),
        None => (cfg.max_epochs, params),
    };
    let test = sealed.unseal(Some(CompletionToken::issue(sealed.fold_key())))?;
    let raw = spec.forward(&params, &standardized(&test.x, &moments))?;
    Ok(FoldOutcome { raw, trace, selected_epoch, params })
}
