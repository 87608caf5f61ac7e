// SPDX-License-Identifier: Apache-2.0

use std::fmt;

use serde::{Deserialize, Serialize};

/// Stamp attached to every fold-averaged score.
pub const FOLD_AVERAGE_WARNING: &str = "biased aggregation — do not rank by this";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricName {
    F1Binary,
    F1Macro,
    F1Micro,
    F1Weighted,
    F1MacroFolds,
    Uar,
    Accuracy,
}

impl fmt::Display for MetricName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            MetricName::F1Binary => "f1_binary",
            MetricName::F1Macro => "f1_macro",
            MetricName::F1Micro => "f1_micro",
            MetricName::F1Weighted => "f1_weighted",
            MetricName::F1MacroFolds => "f1_macro_folds",
            MetricName::Uar => "uar",
            MetricName::Accuracy => "accuracy",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scope {
    Pooled,
    PerFoldAveraged,
}

impl fmt::Display for Scope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scope::Pooled => "pooled",
            Scope::PerFoldAveraged => "per-fold-averaged",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricValue {
    pub name: MetricName,
    /// Class or AU the value refers to; `None` for aggregates.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class: Option<String>,
    pub value: f64,
    pub scope: Scope,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bias_warning: Option<String>,
}

impl MetricValue {
    pub fn pooled(name: MetricName, class: Option<String>, value: f64) -> Self {
        debug_assert!((0.0..=1.0).contains(&value), "{name} = {value}");
        MetricValue { name, class, value, scope: Scope::Pooled, bias_warning: None }
    }

    pub fn fold_averaged(name: MetricName, class: Option<String>, value: f64) -> Self {
        MetricValue {
            name,
            class,
            value,
            scope: Scope::PerFoldAveraged,
            bias_warning: Some(FOLD_AVERAGE_WARNING.to_string()),
        }
    }

    pub fn percent(&self) -> f64 {
        percent_1dp(self.value)
    }

    /// Only pooled, unstamped values may be used to rank methods.
    pub fn rankable(&self) -> bool {
        self.scope == Scope::Pooled && self.bias_warning.is_none()
    }
}

/// `value` on a 0-100 scale rounded to one decimal, ties to even.
pub fn percent_1dp(value: f64) -> f64 {
    (value * 1000.0).round_ties_even() / 10.0
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricTable {
    pub values: Vec<MetricValue>,
}

impl MetricTable {
    pub fn push(&mut self, v: MetricValue) {
        self.values.push(v);
    }

    pub fn get(&self, name: MetricName, class: Option<&str>) -> Option<f64> {
        self.values
            .iter()
            .find(|v| v.name == name && v.class.as_deref() == class)
            .map(|v| v.value)
    }

    pub fn rankable(&self) -> impl Iterator<Item = &MetricValue> {
        self.values.iter().filter(|v| v.rankable())
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["metric", "class", "scope", "value", "percent", "bias_warning"]).expect("memory");
        for v in &self.values {
            w.write_record([
                v.name.to_string(),
                v.class.clone().unwrap_or_default(),
                v.scope.to_string(),
                format!("{:.6}", v.value),
                format!("{:.1}", v.percent()),
                v.bias_warning.clone().unwrap_or_default(),
            ])
            .expect("memory");
        }
        String::from_utf8(w.into_inner().expect("memory")).expect("utf-8")
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("serializable")
    }
}
