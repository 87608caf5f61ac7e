// SPDX-License-Identifier: Apache-2.0

//! Run configuration: parsing with line/field diagnostics, path resolution
//! and input loading.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use mebench_core::data::{
    generate_synthetic, parse_annotations, table_io::read_table_file, DatasetId, DatasetTable, SchemaRegistry,
    SyntheticSpec,
};
use mebench_core::experiments::{FeatureSource, ModelTemplate, StudySpec};
use mebench_core::labels::{AuVocabulary, ObjectiveMap};
use mebench_core::learn::{ModelKind, TrainConfig};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ProtocolKind {
    Loso,
    Lodo,
    Holdout,
    Pde,
}

fn default_folds() -> usize {
    5
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolConfig {
    pub kind: ProtocolKind,
    /// Holdout only: the test dataset. Every other table trains.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test: Option<DatasetId>,
    /// PDE only.
    #[serde(default = "default_folds")]
    pub folds: usize,
    #[serde(default)]
    pub seed: u64,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        ProtocolConfig { kind: ProtocolKind::Lodo, test: None, folds: default_folds(), seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSource {
    pub path: PathBuf,
    /// Schema id for raw annotation sheets. Without one, `path` is a
    /// normalized table written by `ingest`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schema: Option<String>,
}

fn default_model() -> ModelTemplate {
    ModelTemplate::mlp("MLP", vec![64])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schemas: Option<PathBuf>,
    #[serde(default)]
    pub data: Vec<DataSource>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<SyntheticSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vocabulary: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub objective: Option<PathBuf>,
    #[serde(default)]
    pub protocol: ProtocolConfig,
    #[serde(default = "default_model")]
    pub model: ModelTemplate,
    /// Score an external predictions CSV instead of training `model`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predictions: Option<PathBuf>,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub features: FeatureSource,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub study: Option<StudySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    /// First half of the leak-demo opt-in; `--allow-test-leakage` is still
    /// required on the command line.
    #[serde(default)]
    pub leak_demo: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            schemas: None,
            data: Vec::new(),
            synthetic: None,
            vocabulary: None,
            objective: None,
            protocol: ProtocolConfig::default(),
            model: default_model(),
            predictions: None,
            train: TrainConfig::default(),
            features: FeatureSource::default(),
            study: None,
            output: None,
            leak_demo: false,
        }
    }
}

/// A configuration problem, located as precisely as the input allows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub origin: String,
    pub line: Option<usize>,
    pub column: Option<usize>,
    pub field: Option<String>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.origin)?;
        if let Some(l) = self.line {
            write!(f, ":{l}")?;
            if let Some(c) = self.column {
                write!(f, ":{c}")?;
            }
        }
        f.write_str(": ")?;
        if let Some(field) = &self.field {
            write!(f, "field `{field}`: ")?;
        }
        f.write_str(&self.message)
    }
}

impl std::error::Error for ConfigError {}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rfind('\n').map_or(before.len(), |p| before.len() - p - 1) + 1;
    (line, col)
}

/// 1-based line of `key` under the table named by the leading path segments.
/// Array-of-table indices in the path are ignored.
pub fn locate(text: &str, field: &str) -> Option<usize> {
    let parts: Vec<&str> = field.split('.').filter(|p| p.parse::<usize>().is_err() && !p.starts_with('[')).collect();
    let (key, table) = parts.split_last()?;
    let table = table.join(".");
    let mut current = String::new();
    let mut table_line = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(h) = line.strip_prefix('[') {
            current = h.trim_start_matches('[').split(']').next().unwrap_or("").trim().to_string();
            if current == format!("{table}.{key}") || (table.is_empty() && current == *key) {
                return Some(i + 1);
            }
            if current == table {
                table_line.get_or_insert(i + 1);
            }
            continue;
        }
        let assigned = line.split('=').next().map(str::trim);
        if current == table && assigned == Some(*key) && line.contains('=') {
            return Some(i + 1);
        }
    }
    table_line
}

impl RunConfig {
    pub fn parse(text: &str, origin: &str) -> Result<Self, ConfigError> {
        let located = |e: toml::de::Error, field: Option<String>| {
            let (line, column) = match e.span() {
                Some(s) => {
                    let (l, c) = line_col(text, s.start);
                    (Some(l), Some(c))
                }
                None => (field.as_deref().and_then(|f| locate(text, f)), None),
            };
            ConfigError { origin: origin.to_string(), line, column, field, message: e.message().trim().to_string() }
        };
        let de = toml::de::Deserializer::parse(text).map_err(|e| located(e, None))?;
        let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let field = (path != ".").then_some(path);
            located(e.into_inner(), field)
        })?;
        cfg.check(text, origin)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let origin = path.display().to_string();
        let text = fs::read_to_string(path).map_err(|e| ConfigError {
            origin: origin.clone(),
            line: None,
            column: None,
            field: None,
            message: e.to_string(),
        })?;
        RunConfig::parse(&text, &origin)
    }

    fn check(&self, text: &str, origin: &str) -> Result<(), ConfigError> {
        let err = |field: &str, message: String| ConfigError {
            origin: origin.to_string(),
            line: locate(text, field),
            column: None,
            field: Some(field.to_string()),
            message,
        };
        if self.protocol.kind == ProtocolKind::Holdout && self.protocol.test.is_none() {
            return Err(err("protocol.kind", "holdout needs `protocol.test`".into()));
        }
        if self.protocol.kind == ProtocolKind::Pde && self.protocol.folds < 2 {
            return Err(err("protocol.folds", "need at least 2 folds".into()));
        }
        if self.model.kind == ModelKind::Mlp && self.model.hidden.contains(&0) {
            return Err(err("model.hidden", "hidden layers must have at least one unit".into()));
        }
        if let Some(i) = self.data.iter().position(|d| d.schema.is_some()) {
            if self.schemas.is_none() {
                return Err(err("schemas", format!("data[{i}] names a schema but no `schemas` directory is set")));
            }
        }
        if self.train.seeds.is_empty() {
            return Err(err("train.seeds", "at least one seed is required".into()));
        }
        Ok(())
    }

    /// Joins every relative path onto `base` and checks that each exists.
    pub fn resolve(&mut self, base: &Path) -> Result<(), ConfigError> {
        let mut missing = Vec::new();
        let mut fix = |p: &mut PathBuf, field: String| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
            if !p.exists() {
                missing.push((field, p.display().to_string()));
            }
        };
        if let Some(p) = &mut self.schemas {
            fix(p, "schemas".into());
        }
        for (i, d) in self.data.iter_mut().enumerate() {
            fix(&mut d.path, format!("data[{i}].path"));
        }
        if let Some(p) = &mut self.vocabulary {
            fix(p, "vocabulary".into());
        }
        if let Some(p) = &mut self.objective {
            fix(p, "objective".into());
        }
        if let Some(p) = &mut self.predictions {
            fix(p, "predictions".into());
        }
        if let FeatureSource::Store { path } = &mut self.features {
            fix(path, "features.path".into());
        }
        if let Some(FeatureSource::Store { path }) = self.study.as_mut().map(|s| &mut s.features) {
            fix(path, "study.features.path".into());
        }
        if let Some(p) = &mut self.output {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        match missing.into_iter().next() {
            Some((field, path)) => Err(ConfigError {
                origin: base.display().to_string(),
                line: None,
                column: None,
                field: Some(field),
                message: format!("{path} does not exist"),
            }),
            None => Ok(()),
        }
    }

    pub fn load_tables(&self) -> anyhow::Result<Vec<DatasetTable>> {
        let registry = match &self.schemas {
            Some(dir) => SchemaRegistry::load_dir(dir)?,
            None => SchemaRegistry::default(),
        };
        let mut tables = Vec::new();
        for d in &self.data {
            let table = match &d.schema {
                Some(id) => {
                    let raw = fs::read_to_string(&d.path)?;
                    parse_annotations(&raw, registry.get(id)?)
                        .map_err(|e| anyhow::anyhow!("{}: {e}", d.path.display()))?
                }
                None => read_table_file(&d.path)?,
            };
            tables.push(table);
        }
        if let Some(spec) = &self.synthetic {
            tables.extend(generate_synthetic(spec)?);
        }
        Ok(tables)
    }

    pub fn load_vocabulary(&self) -> anyhow::Result<AuVocabulary> {
        Ok(match &self.vocabulary {
            Some(p) => AuVocabulary::from_toml(&fs::read_to_string(p)?)?,
            None => AuVocabulary::cd6me(),
        })
    }

    pub fn load_objective(&self) -> anyhow::Result<Option<ObjectiveMap>> {
        self.objective.as_ref().map(|p| Ok(ObjectiveMap::from_toml(&fs::read_to_string(p)?)?)).transpose()
    }
}
