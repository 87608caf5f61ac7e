// SPDX-License-Identifier: Apache-2.0

//! How far the AU set alone determines the emotion label.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{ExperimentError, ReportTable};
use crate::data::{AuCode, DatasetTable, Sample};
use crate::labels::{map_objective, ObjectiveMap};
use crate::metrics::{f1_macro, ConfusionCounts};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LabelKind {
    Emotion,
    Objective,
}

/// Majority label per exact AU set.
///
/// Fit and evaluated on the same data, it returns the best score any
/// function of the AU set can reach there.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuPatternClassifier {
    lookup: BTreeMap<String, String>,
    fallback: String,
}

fn majority<'a>(labels: impl IntoIterator<Item = &'a str>) -> Option<String> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for l in labels {
        *counts.entry(l).or_default() += 1;
    }
    // ascending iteration: ties go to the lexicographically smallest label
    let mut best: Option<(&str, usize)> = None;
    for (l, c) in counts {
        if best.is_none_or(|(_, b)| c > b) {
            best = Some((l, c));
        }
    }
    best.map(|(l, _)| l.to_string())
}

impl AuPatternClassifier {
    /// `keys[i]` is the canonical AU-set key of sample `i`. Returns `None`
    /// on empty input.
    pub fn fit(keys: &[String], labels: &[String]) -> Option<Self> {
        assert_eq!(keys.len(), labels.len());
        let fallback = majority(labels.iter().map(String::as_str))?;
        let mut groups: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
        for (k, l) in keys.iter().zip(labels) {
            groups.entry(k).or_default().push(l);
        }
        let lookup = groups.into_iter().map(|(k, ls)| (k.to_string(), majority(ls).expect("non-empty group"))).collect();
        Some(AuPatternClassifier { lookup, fallback })
    }

    pub fn predict(&self, key: &str) -> &str {
        self.lookup.get(key).unwrap_or(&self.fallback)
    }

    pub fn patterns(&self) -> usize {
        self.lookup.len()
    }

    pub fn fallback(&self) -> &str {
        &self.fallback
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Stump {
    feature: usize,
    /// Predicted class when the AU is absent / present.
    classes: [usize; 2],
    alpha: f64,
}

/// Multi-class AdaBoost (SAMME) over one-AU decision stumps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostedStumps {
    aus: Vec<AuCode>,
    n_classes: usize,
    prior: usize,
    stumps: Vec<Stump>,
}

impl BoostedStumps {
    pub fn fit(sets: &[&BTreeSet<AuCode>], y: &[usize], n_classes: usize, rounds: usize) -> Self {
        assert_eq!(sets.len(), y.len());
        let aus: Vec<AuCode> = sets.iter().flat_map(|s| s.iter().copied()).collect::<BTreeSet<_>>().into_iter().collect();
        let x: Vec<Vec<bool>> = sets.iter().map(|s| aus.iter().map(|a| s.contains(a)).collect()).collect();
        let n = y.len();
        let mut prior_counts = vec![0usize; n_classes];
        y.iter().for_each(|&c| prior_counts[c] += 1);
        let prior = argmax(&prior_counts.iter().map(|&c| c as f64).collect::<Vec<_>>());
        let mut out = BoostedStumps { aus, n_classes, prior, stumps: Vec::new() };
        if n == 0 || n_classes < 2 {
            return out;
        }
        let k = n_classes as f64;
        let mut w = vec![1.0 / n as f64; n];
        for _ in 0..rounds {
            let mut best: Option<(f64, Stump)> = None;
            for j in 0..out.aus.len() {
                let mut mass = [vec![0.0; n_classes], vec![0.0; n_classes]];
                for i in 0..n {
                    mass[usize::from(x[i][j])][y[i]] += w[i];
                }
                let classes = [argmax(&mass[0]), argmax(&mass[1])];
                let err: f64 = (0..n).filter(|&i| classes[usize::from(x[i][j])] != y[i]).map(|i| w[i]).sum();
                if best.as_ref().is_none_or(|(e, _)| err < *e - 1e-15) {
                    best = Some((err, Stump { feature: j, classes, alpha: 0.0 }));
                }
            }
            let Some((err, mut stump)) = best else { break };
            if err >= 1.0 - 1.0 / k {
                break;
            }
            let err = err.max(1e-10);
            stump.alpha = ((1.0 - err) / err).ln() + (k - 1.0).ln();
            for i in 0..n {
                if stump.classes[usize::from(x[i][stump.feature])] != y[i] {
                    w[i] *= stump.alpha.exp();
                }
            }
            let total: f64 = w.iter().sum();
            w.iter_mut().for_each(|v| *v /= total);
            let perfect = err <= 1e-10;
            out.stumps.push(stump);
            if perfect {
                break;
            }
        }
        out
    }

    pub fn predict(&self, set: &BTreeSet<AuCode>) -> usize {
        if self.stumps.is_empty() {
            return self.prior;
        }
        let mut votes = vec![0.0; self.n_classes];
        for s in &self.stumps {
            let present = set.contains(&self.aus[s.feature]);
            votes[s.classes[usize::from(present)]] += s.alpha;
        }
        argmax(&votes)
    }

    pub fn rounds(&self) -> usize {
        self.stumps.len()
    }
}

/// Largest value, first index on ties.
fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

fn labels_of<'a>(
    table: &'a DatasetTable,
    kind: LabelKind,
    objective: Option<&ObjectiveMap>,
) -> Result<Vec<(&'a Sample, String)>, ExperimentError> {
    let mut out = Vec::with_capacity(table.len());
    for s in table.samples() {
        match kind {
            LabelKind::Emotion => match &s.emotion {
                Some(e) => out.push((s, e.clone())),
                None => {
                    return Err(ExperimentError::MissingLabels(format!("sample {} has no emotion label", s.sample_id)));
                }
            },
            LabelKind::Objective => {
                let map = objective.ok_or(ExperimentError::ObjectiveMapMissing)?;
                let c = map_objective(&s.au_set, map);
                if map.exclude_fallback && c == map.fallback_index() {
                    continue;
                }
                out.push((s, map.classes[c].clone()));
            }
        }
    }
    Ok(out)
}

/// Macro F1 over the classes seen in `truth` or `predicted`.
pub fn macro_f1_labels(truth: &[String], predicted: &[String]) -> f64 {
    let classes: Vec<String> = truth.iter().chain(predicted).cloned().collect::<BTreeSet<_>>().into_iter().collect();
    let index = |l: &String| classes.binary_search(l).expect("present");
    let t: Vec<usize> = truth.iter().map(index).collect();
    let p: Vec<usize> = predicted.iter().map(index).collect();
    f1_macro(&ConfusionCounts::from_multiclass(&p, &t, classes).expect("equal lengths"))
}

/// Fits each classifier on all samples of a table and scores macro F1 on the
/// same samples. One row per table; a second column holds boosted stumps
/// when `stump_rounds` is set.
pub fn study_emotion_from_aus(
    tables: &[DatasetTable],
    kind: LabelKind,
    objective: Option<&ObjectiveMap>,
    stump_rounds: Option<usize>,
) -> Result<ReportTable, ExperimentError> {
    let mut columns = vec!["AU pattern".to_string()];
    if stump_rounds.is_some() {
        columns.push("boosted stumps".to_string());
    }
    let mut report = ReportTable::new("emotion-from-aus", "Predicting labels from AU sets", "macro F1", columns);
    report.rank_by = Some(0);
    for t in tables {
        let labelled = labels_of(t, kind, objective)?;
        if labelled.is_empty() {
            return Err(ExperimentError::MissingLabels(format!("{}: no labelled samples", t.dataset_id())));
        }
        let keys: Vec<String> = labelled.iter().map(|(s, _)| s.au_key()).collect();
        let truth: Vec<String> = labelled.iter().map(|(_, l)| l.clone()).collect();
        let clf = AuPatternClassifier::fit(&keys, &truth).expect("non-empty");
        let predicted: Vec<String> = keys.iter().map(|k| clf.predict(k).to_string()).collect();
        let mut cells = vec![Some(macro_f1_labels(&truth, &predicted))];
        if let Some(rounds) = stump_rounds {
            let classes: Vec<String> = truth.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect();
            let y: Vec<usize> = truth.iter().map(|l| classes.binary_search(l).expect("present")).collect();
            let sets: Vec<&BTreeSet<AuCode>> = labelled.iter().map(|(s, _)| &s.au_set).collect();
            let model = BoostedStumps::fit(&sets, &y, classes.len(), rounds);
            let p: Vec<String> = sets.iter().map(|s| classes[model.predict(s)].clone()).collect();
            cells.push(Some(macro_f1_labels(&truth, &p)));
        }
        let label = match kind {
            LabelKind::Emotion => t.dataset_id().to_string(),
            LabelKind::Objective => format!("{} (objective)", t.dataset_id()),
        };
        report.push(label, cells);
    }
    Ok(report)
}
