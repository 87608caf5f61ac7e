// SPDX-License-Identifier: Apache-2.0

//! Dataset schema descriptors and the annotation-table parser.
//!
//! Every source dataset ships its own spreadsheet layout. A [`Schema`] names
//! the columns holding each field, the delimiter, and the AU-string syntax, so
//! new layouts are added as TOML files rather than code.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::au::parse_au_list;
use super::{DataError, DatasetId, DatasetTable, Sample};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColumnMap {
    pub subject: String,
    pub onset: String,
    pub apex: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offset: Option<String>,
    pub action_units: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub emotion: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Schema {
    pub id: String,
    pub version: u32,
    pub dataset: DatasetId,
    #[serde(default = "default_delimiter")]
    pub delimiter: String,
    #[serde(default = "default_separator")]
    pub au_separator: String,
    /// Cell values treated as "not annotated" for optional frame columns.
    #[serde(default = "default_missing")]
    pub missing_values: Vec<String>,
    pub columns: ColumnMap,
}

fn default_delimiter() -> String {
    ",".into()
}

fn default_separator() -> String {
    "+".into()
}

fn default_missing() -> Vec<String> {
    ["", "/", "-", "NA", "n/a"].iter().map(|s| s.to_string()).collect()
}

impl Schema {
    pub fn from_toml(text: &str) -> Result<Self, DataError> {
        let schema: Schema = toml::from_str(text).map_err(|e| DataError::Schema(e.to_string()))?;
        if schema.version != SCHEMA_VERSION {
            return Err(DataError::Schema(format!(
                "schema {} has version {}, expected {SCHEMA_VERSION}",
                schema.id, schema.version
            )));
        }
        if schema.delimiter_byte().is_none() {
            return Err(DataError::Schema(format!(
                "schema {}: delimiter must be a single byte (use \"\\t\" for tabs)",
                schema.id
            )));
        }
        Ok(schema)
    }

    fn delimiter_byte(&self) -> Option<u8> {
        match self.delimiter.as_str() {
            "\\t" | "tab" => Some(b'\t'),
            d if d.len() == 1 => Some(d.as_bytes()[0]),
            _ => None,
        }
    }

    fn is_missing(&self, cell: &str) -> bool {
        self.missing_values.iter().any(|m| m.eq_ignore_ascii_case(cell))
    }
}

/// Schema descriptors indexed by id.
#[derive(Debug, Clone, Default)]
pub struct SchemaRegistry {
    schemas: BTreeMap<String, Schema>,
}

impl SchemaRegistry {
    /// Loads every `*.toml` file in `dir`.
    pub fn load_dir(dir: impl AsRef<Path>) -> Result<Self, DataError> {
        let dir = dir.as_ref();
        let mut entries: Vec<_> = fs::read_dir(dir)
            .map_err(|e| DataError::Io(format!("{}: {e}", dir.display())))?
            .filter_map(Result::ok)
            .map(|e| e.path())
            .filter(|p| p.extension().is_some_and(|x| x == "toml"))
            .collect();
        entries.sort();
        let mut registry = SchemaRegistry::default();
        for path in entries {
            let text = fs::read_to_string(&path)
                .map_err(|e| DataError::Io(format!("{}: {e}", path.display())))?;
            let schema = Schema::from_toml(&text)
                .map_err(|e| DataError::Schema(format!("{}: {e}", path.display())))?;
            registry.insert(schema);
        }
        Ok(registry)
    }

    pub fn insert(&mut self, schema: Schema) {
        self.schemas.insert(schema.id.clone(), schema);
    }

    pub fn get(&self, id: &str) -> Result<&Schema, DataError> {
        self.schemas.get(id).ok_or_else(|| DataError::UnknownSchema(id.to_string()))
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.schemas.keys().map(String::as_str)
    }
}

/// Parses a delimited annotation table into a normalized [`DatasetTable`].
///
/// Rows are numbered from 1 (the header is row 0) in error messages.
pub fn parse_annotations(raw: &str, schema: &Schema) -> Result<DatasetTable, DataError> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(schema.delimiter_byte().unwrap_or(b','))
        .trim(csv::Trim::All)
        .flexible(false)
        .from_reader(raw.as_bytes());

    let headers = reader.headers().map_err(|e| DataError::Csv(e.to_string()))?.clone();
    let column = |name: &str| -> Result<usize, DataError> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| DataError::MissingColumn { schema: schema.id.clone(), column: name.into() })
    };
    let optional = |name: &Option<String>| name.as_deref().map(column).transpose();

    let cols = &schema.columns;
    let subject_col = column(&cols.subject)?;
    let onset_col = column(&cols.onset)?;
    let apex_col = column(&cols.apex)?;
    let au_col = column(&cols.action_units)?;
    let offset_col = optional(&cols.offset)?;
    let id_col = optional(&cols.sample_id)?;
    let emotion_col = optional(&cols.emotion)?;

    let mut samples = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| DataError::Csv(format!("row {row}: {e}")))?;
        let cell = |c: usize| record.get(c).unwrap_or("");

        let subject = cell(subject_col);
        if subject.is_empty() {
            return Err(DataError::EmptySubjectRow { row });
        }
        let frame = |c: usize, field: &'static str| -> Result<u32, DataError> {
            let v = cell(c);
            v.parse::<u32>().map_err(|_| DataError::BadFrame { row, field, value: v.to_string() })
        };
        let onset = frame(onset_col, "onset")?;
        let apex = frame(apex_col, "apex")?;
        let offset = match offset_col {
            Some(c) if !schema.is_missing(cell(c)) => Some(frame(c, "offset")?),
            _ => None,
        };
        let aus = parse_au_list(cell(au_col), &schema.au_separator)
            .map_err(|e| DataError::Row { row, source: Box::new(e) })?;

        let local_id = match id_col {
            Some(c) if !cell(c).is_empty() => cell(c).to_string(),
            _ => format!("row{row}"),
        };
        let sample_id = format!("{}/{}/{}", schema.dataset, subject, local_id);
        let mut sample =
            Sample::new(sample_id, schema.dataset.clone(), subject, onset, apex, offset, aus)?;
        if let Some(c) = emotion_col {
            let e = cell(c);
            if !e.is_empty() {
                sample.emotion = Some(e.to_string());
            }
        }
        samples.push(sample);
    }
    DatasetTable::new(schema.dataset.clone(), samples)
}
