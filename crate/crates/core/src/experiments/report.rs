// SPDX-License-Identifier: Apache-2.0

//! Report tables, provenance and the output bundle every study writes.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{ExperimentError, StudyKind};
use crate::data::{table_io::table_to_string, DatasetTable};
use crate::metrics::percent_1dp;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub label: String,
    /// Fractions in `[0, 1]`; `None` marks a cell that does not apply.
    pub cells: Vec<Option<f64>>,
}

/// A results table: labelled rows of optional scores.
///
/// Rows produced with leak-demo access live in `tainted_rows`, never in
/// `rows`, so nothing that walks the clean rows (rankings, averages) can pick
/// them up by accident.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportTable {
    pub id: String,
    pub title: String,
    pub metric: String,
    pub columns: Vec<String>,
    pub rows: Vec<ReportRow>,
    #[serde(default)]
    pub tainted_rows: Vec<ReportRow>,
    /// Column the ranking is computed on; the last column when unset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank_by: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankEntry {
    pub rank: usize,
    pub label: String,
    pub value: f64,
}

impl ReportTable {
    pub fn new(id: impl Into<String>, title: impl Into<String>, metric: impl Into<String>, columns: Vec<String>) -> Self {
        ReportTable {
            id: id.into(),
            title: title.into(),
            metric: metric.into(),
            columns,
            rows: Vec::new(),
            tainted_rows: Vec::new(),
            rank_by: None,
            notes: Vec::new(),
        }
    }

    fn check(&self, cells: &[Option<f64>]) {
        assert_eq!(cells.len(), self.columns.len(), "row width must match the header of {}", self.id);
    }

    pub fn push(&mut self, label: impl Into<String>, cells: Vec<Option<f64>>) {
        self.check(&cells);
        self.rows.push(ReportRow { label: label.into(), cells });
    }

    pub fn push_tainted(&mut self, label: impl Into<String>, cells: Vec<Option<f64>>) {
        self.check(&cells);
        self.tainted_rows.push(ReportRow { label: label.into(), cells });
    }

    /// Pushes a row into the clean or the tainted section.
    pub fn push_row(&mut self, label: impl Into<String>, cells: Vec<Option<f64>>, tainted: bool) {
        if tainted {
            self.push_tainted(label, cells)
        } else {
            self.push(label, cells)
        }
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Looks a cell up in either section.
    pub fn cell(&self, row: &str, column: &str) -> Option<f64> {
        let c = self.column(column)?;
        self.rows.iter().chain(&self.tainted_rows).find(|r| r.label == row).and_then(|r| r.cells[c])
    }

    pub fn row(&self, label: &str) -> Option<&ReportRow> {
        self.rows.iter().chain(&self.tainted_rows).find(|r| r.label == label)
    }

    /// Clean rows only, best first; ties keep table order.
    pub fn ranking(&self) -> Vec<RankEntry> {
        if self.columns.is_empty() {
            return Vec::new();
        }
        let c = self.rank_by.unwrap_or(self.columns.len() - 1);
        let mut scored: Vec<(&str, f64)> =
            self.rows.iter().filter_map(|r| r.cells[c].map(|v| (r.label.as_str(), v))).collect();
        scored.sort_by(|a, b| b.1.total_cmp(&a.1));
        scored.into_iter().enumerate().map(|(i, (l, v))| RankEntry { rank: i + 1, label: l.to_string(), value: v }).collect()
    }

    /// `section,label,<columns...>` with values in percent to one decimal.
    /// Clean rows come first, then the tainted section.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["section".to_string(), "label".to_string()];
        header.extend(self.columns.iter().cloned());
        w.write_record(&header).expect("memory");
        let sections = [("clean", &self.rows), ("tainted", &self.tainted_rows)];
        for (section, rows) in sections {
            for r in rows {
                let mut rec = vec![section.to_string(), r.label.clone()];
                rec.extend(r.cells.iter().map(|c| c.map(|v| format!("{:.1}", percent_1dp(v))).unwrap_or_default()));
                w.write_record(&rec).expect("memory");
            }
        }
        String::from_utf8(w.into_inner().expect("memory")).expect("utf-8")
    }

    pub fn to_json(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("serializable");
        v["ranking"] = serde_json::to_value(self.ranking()).expect("serializable");
        v
    }

    /// Grouped bar chart: one group per row, one bar per column. Tainted
    /// groups are hatched, labelled and drawn after a separator.
    pub fn to_svg(&self) -> String {
        let groups: Vec<(&ReportRow, bool)> =
            self.rows.iter().map(|r| (r, false)).chain(self.tainted_rows.iter().map(|r| (r, true))).collect();
        let bar = 22.0;
        let gap = 28.0;
        let plot_h = 240.0;
        let left = 50.0;
        let top = 40.0;
        let n_cols = self.columns.len().max(1) as f64;
        let group_w = n_cols * bar + gap;
        let width = left + groups.len().max(1) as f64 * group_w + 20.0 + 160.0;
        let height = top + plot_h + 70.0;
        let palette = ["#4e79a7", "#f28e2b", "#59a14f", "#e15759", "#76b7b2", "#edc948", "#b07aa1", "#9c755f"];

        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="sans-serif" font-size="11">"#
        );
        let _ = writeln!(
            s,
            r##"<defs><pattern id="taint" width="6" height="6" patternUnits="userSpaceOnUse" patternTransform="rotate(45)"><rect width="6" height="6" fill="white"/><line x1="0" y1="0" x2="0" y2="6" stroke="#c00" stroke-width="3"/></pattern></defs>"##
        );
        let _ = writeln!(s, r#"<text x="{left}" y="20" font-size="13">{}</text>"#, escape(&self.title));
        for t in 0..=4 {
            let v = t as f64 * 0.25;
            let y = top + plot_h * (1.0 - v);
            let _ = writeln!(
                s,
                r##"<line x1="{left}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#ddd"/><text x="{:.1}" y="{:.1}" text-anchor="end">{:.0}</text>"##,
                width - 170.0,
                left - 4.0,
                y + 4.0,
                v * 100.0
            );
        }
        let mut first_tainted = true;
        for (g, (row, tainted)) in groups.iter().enumerate() {
            let x0 = left + 10.0 + g as f64 * group_w;
            if *tainted && first_tainted {
                first_tainted = false;
                let _ = writeln!(
                    s,
                    r##"<line x1="{:.1}" y1="{top}" x2="{:.1}" y2="{:.1}" stroke="#c00" stroke-dasharray="4 3"/>"##,
                    x0 - gap / 2.0,
                    x0 - gap / 2.0,
                    top + plot_h
                );
            }
            for (c, cell) in row.cells.iter().enumerate() {
                let Some(v) = cell else { continue };
                let h = plot_h * v.clamp(0.0, 1.0);
                let x = x0 + c as f64 * bar;
                let y = top + plot_h - h;
                let colour = palette[c % palette.len()];
                if *tainted {
                    let _ = writeln!(
                        s,
                        r##"<rect x="{x:.1}" y="{y:.1}" width="{:.1}" height="{h:.1}" fill="url(#taint)" stroke="{colour}" stroke-width="2"/>"##,
                        bar - 2.0
                    );
                } else {
                    let _ = writeln!(s, r#"<rect x="{x:.1}" y="{y:.1}" width="{:.1}" height="{h:.1}" fill="{colour}"/>"#, bar - 2.0);
                }
                let _ = writeln!(
                    s,
                    r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="9">{:.1}</text>"#,
                    x + bar / 2.0 - 1.0,
                    y - 3.0,
                    percent_1dp(*v)
                );
            }
            let label = if *tainted { format!("{} [tainted]", row.label) } else { row.label.clone() };
            let _ = writeln!(
                s,
                r##"<text x="{:.1}" y="{:.1}" text-anchor="middle"{}>{}</text>"##,
                x0 + n_cols * bar / 2.0,
                top + plot_h + 16.0,
                if *tainted { r##" fill="#c00""## } else { "" },
                escape(&label)
            );
        }
        let lx = width - 160.0;
        for (c, name) in self.columns.iter().enumerate() {
            let y = top + c as f64 * 16.0;
            let _ = writeln!(
                s,
                r#"<rect x="{lx:.1}" y="{y:.1}" width="10" height="10" fill="{}"/><text x="{:.1}" y="{:.1}">{}</text>"#,
                palette[c % palette.len()],
                lx + 14.0,
                y + 9.0,
                escape(name)
            );
        }
        s.push_str("</svg>\n");
        s
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Everything needed to re-run a study bit-identically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyProvenance {
    pub study: StudyKind,
    pub code_version: String,
    /// Echo of the study configuration as run.
    pub config: serde_json::Value,
    pub seeds: Vec<u64>,
    /// SHA-256 of each input table's normalized form, by dataset code.
    pub data_checksums: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub label_checksums: BTreeMap<String, String>,
}

impl StudyProvenance {
    pub fn new(study: StudyKind, config: serde_json::Value, seeds: Vec<u64>, tables: &[DatasetTable]) -> Self {
        StudyProvenance {
            study,
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            config,
            seeds,
            data_checksums: tables.iter().map(|t| (t.dataset_id().to_string(), table_checksum(t))).collect(),
            label_checksums: BTreeMap::new(),
        }
    }
}

pub fn table_checksum(t: &DatasetTable) -> String {
    hex::encode(Sha256::digest(table_to_string(t).as_bytes()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyOutput {
    pub study: StudyKind,
    pub tables: Vec<ReportTable>,
    pub provenance: StudyProvenance,
    /// SVG figure, when the study has one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub figure: Option<String>,
}

impl StudyOutput {
    pub fn table(&self, id: &str) -> Option<&ReportTable> {
        self.tables.iter().find(|t| t.id == id)
    }

    pub fn to_json(&self) -> String {
        let v = serde_json::json!({
            "study": self.study,
            "tables": self.tables.iter().map(ReportTable::to_json).collect::<Vec<_>>(),
            "provenance": self.provenance,
            "figure": self.figure,
        });
        let mut s = serde_json::to_string_pretty(&v).expect("serializable");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, ExperimentError> {
        serde_json::from_str(text).map_err(|e| ExperimentError::Report(e.to_string()))
    }

    /// Writes `<table>.csv` for every table, `study.json`, `provenance.json`
    /// and `<study>.svg` when there is a figure. Returns the written paths.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>, ExperimentError> {
        std::fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        let mut put = |name: String, body: &str| -> std::io::Result<()> {
            let p = dir.join(name);
            std::fs::write(&p, body)?;
            written.push(p);
            Ok(())
        };
        for t in &self.tables {
            put(format!("{}.csv", t.id), &t.to_csv())?;
        }
        put("study.json".into(), &self.to_json())?;
        let mut prov = serde_json::to_string_pretty(&self.provenance).expect("serializable");
        prov.push('\n');
        put("provenance.json".into(), &prov)?;
        if let Some(svg) = &self.figure {
            put(format!("{}.svg", self.study), svg)?;
        }
        Ok(written)
    }
}
