// SPDX-License-Identifier: Apache-2.0

//! Rule-based mapping from AU sets to emotion-agnostic objective classes.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::LabelError;
use crate::data::AuCode;

/// One rule: matches when the AU set contains every `all_of` AU, at least one
/// `any_of` AU (if any are listed) and none of the `none_of` AUs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveRule {
    pub class: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub all_of: Vec<AuCode>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub any_of: Vec<AuCode>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub none_of: Vec<AuCode>,
}

impl ObjectiveRule {
    pub fn matches(&self, aus: &BTreeSet<AuCode>) -> bool {
        self.all_of.iter().all(|a| aus.contains(a))
            && (self.any_of.is_empty() || self.any_of.iter().any(|a| aus.contains(a)))
            && !self.none_of.iter().any(|a| aus.contains(a))
    }
}

/// Ordered rules with a fallback class; the first matching rule wins.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveMap {
    pub name: String,
    pub version: u32,
    pub classes: Vec<String>,
    pub fallback: String,
    /// Samples falling through to the fallback are left out of tasks that use
    /// this map.
    #[serde(default)]
    pub exclude_fallback: bool,
    pub rules: Vec<ObjectiveRule>,
}

impl ObjectiveMap {
    pub fn from_toml(text: &str) -> Result<Self, LabelError> {
        let map: ObjectiveMap = toml::from_str(text).map_err(|e| LabelError::RuleFile(e.to_string()))?;
        map.validate()?;
        Ok(map)
    }

    pub fn validate(&self) -> Result<(), LabelError> {
        if self.version != 1 {
            return Err(LabelError::RuleFile(format!("objective map version {} unsupported", self.version)));
        }
        let known: BTreeSet<&str> = self.classes.iter().map(String::as_str).collect();
        if known.len() != self.classes.len() {
            return Err(LabelError::RuleFile(format!("{}: duplicate class names", self.name)));
        }
        if !known.contains(self.fallback.as_str()) {
            return Err(LabelError::UnknownClass(self.fallback.clone()));
        }
        if let Some(r) = self.rules.iter().find(|r| !known.contains(r.class.as_str())) {
            return Err(LabelError::UnknownClass(r.class.clone()));
        }
        Ok(())
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn class_index(&self, name: &str) -> Option<usize> {
        self.classes.iter().position(|c| c == name)
    }

    pub fn fallback_index(&self) -> usize {
        self.class_index(&self.fallback).expect("validated")
    }

    /// Class ids used by a task: every class, minus the fallback when it is
    /// excluded.
    pub fn task_classes(&self) -> Vec<usize> {
        let fb = self.fallback_index();
        (0..self.classes.len()).filter(|&c| !(self.exclude_fallback && c == fb)).collect()
    }

    pub fn checksum(&self) -> String {
        let canon = serde_json::to_string(self).expect("serializable");
        hex::encode(Sha256::digest(canon.as_bytes()))
    }
}

/// Class id (index into `map.classes`) of the first rule matching `aus`.
pub fn map_objective(aus: &BTreeSet<AuCode>, map: &ObjectiveMap) -> usize {
    map.rules
        .iter()
        .find(|r| r.matches(aus))
        .and_then(|r| map.class_index(&r.class))
        .unwrap_or_else(|| map.fallback_index())
}
