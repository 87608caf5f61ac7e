// SPDX-License-Identifier: Apache-2.0

//! `report`: merges run reports and study outputs into one table set.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use mebench_core::experiments::{ReportTable, StudyOutput};
use mebench_core::learn::{RunReport, REPORT_FORMAT};
use mebench_core::metrics::MetricName;

const RUN_METRICS: [MetricName; 5] =
    [MetricName::F1Macro, MetricName::F1Micro, MetricName::F1Weighted, MetricName::Uar, MetricName::Accuracy];

enum Input {
    Run(PathBuf, Box<RunReport>),
    Study(StudyOutput),
}

fn read(path: &Path) -> anyhow::Result<Input> {
    let path = if path.is_dir() {
        [path.join("run.json"), path.join("study.json")]
            .into_iter()
            .find(|p| p.exists())
            .with_context(|| format!("{}: no run.json or study.json inside", path.display()))?
    } else {
        path.to_path_buf()
    };
    let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    let v: serde_json::Value = serde_json::from_str(&text).with_context(|| format!("{}: not JSON", path.display()))?;
    if v.get("format").and_then(|f| f.as_str()) == Some(REPORT_FORMAT) {
        Ok(Input::Run(path.clone(), Box::new(RunReport::from_json(&text)?)))
    } else if v.get("study").is_some() && v.get("tables").is_some() {
        Ok(Input::Study(StudyOutput::from_json(&text)?))
    } else {
        bail!("{}: neither a run report nor a study output", path.display())
    }
}

fn run_label(path: &Path, r: &RunReport) -> String {
    let dir = path.parent().and_then(|p| p.file_name()).map(|n| n.to_string_lossy().into_owned());
    let model = r.model.as_ref().map_or("external".to_string(), |m| m.kind.to_string());
    match dir {
        Some(d) => format!("{d} ({model}, {})", r.plan.protocol),
        None => format!("{model}, {}", r.plan.protocol),
    }
}

/// One table of run metrics followed by every study table, each row tagged
/// with its source. Unrankable runs go to the segregated section.
fn merge(inputs: &[Input]) -> Vec<ReportTable> {
    let mut runs = ReportTable::new("runs", "Run reports", "score", RUN_METRICS.iter().map(ToString::to_string).collect());
    runs.rank_by = Some(0);
    let mut tables = Vec::new();
    for input in inputs {
        match input {
            Input::Run(path, r) => {
                let cells = RUN_METRICS.iter().map(|m| r.metric(*m, None)).collect();
                runs.push_row(run_label(path, r), cells, !r.rankable());
            }
            Input::Study(s) => tables.extend(s.tables.iter().cloned()),
        }
    }
    if !runs.rows.is_empty() || !runs.tainted_rows.is_empty() {
        tables.insert(0, runs);
    }
    tables
}

pub fn report(paths: &[PathBuf], out: Option<PathBuf>) -> anyhow::Result<u8> {
    let inputs = paths.iter().map(|p| read(p)).collect::<anyhow::Result<Vec<_>>>()?;
    let tables = merge(&inputs);
    let dir = out.unwrap_or_else(|| PathBuf::from("mebench-report"));
    fs::create_dir_all(&dir)?;
    for t in &tables {
        fs::write(dir.join(format!("{}.csv", t.id)), t.to_csv())?;
        fs::write(dir.join(format!("{}.svg", t.id)), t.to_svg())?;
    }
    let json: Vec<serde_json::Value> = tables.iter().map(ReportTable::to_json).collect();
    fs::write(dir.join("report.json"), serde_json::to_string_pretty(&json)? + "\n")?;
    for t in &tables {
        let ranked = t.ranking();
        println!("{}: {} ranked, {} segregated", t.id, ranked.len(), t.tainted_rows.len());
    }
    println!("wrote {} tables to {}", tables.len(), dir.display());
    Ok(0)
}
