// SPDX-License-Identifier: Apache-2.0

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use mebench_core::data::{compute_stats, table_io::write_table, DatasetId, DatasetTable};
use mebench_core::experiments::{run_study, StudyInputs, StudyKind, StudySpec};
use mebench_core::learn::{read_predictions_csv, run_external, run_protocol, RunOptions, RunReport, Stopping, TaskData};
use mebench_core::protocols::{
    make_holdout_multi, make_lodo, make_loso, make_pde, training_cost, AccessMode, FoldPlan,
};

use crate::config::{locate, ConfigError, DataSource, ProtocolKind, RunConfig};
use crate::status;
use crate::{Inputs, LeakFlags};

const DEFAULT_OUT: &str = "mebench-out";

/// The config plus the raw text it came from, for locating keys in later
/// diagnostics.
struct Loaded {
    cfg: RunConfig,
    text: String,
    origin: String,
}

fn load_config(path: &Path) -> anyhow::Result<Loaded> {
    let mut cfg = RunConfig::load(path)?;
    let text = fs::read_to_string(path)?;
    let base = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    cfg.resolve(base).map_err(|e| ConfigError { origin: path.display().to_string(), line: e.field.as_deref().and_then(|f| locate(&text, f)), ..e })?;
    Ok(Loaded { cfg, text, origin: path.display().to_string() })
}

fn load_inputs(inputs: &Inputs) -> anyhow::Result<Loaded> {
    if let Some(path) = &inputs.config {
        return load_config(path);
    }
    if inputs.annotations.is_empty() {
        bail!("give --config or at least one annotation file");
    }
    let mut cfg = RunConfig {
        schemas: inputs.schema.as_ref().map(|_| inputs.schemas.clone()),
        data: inputs
            .annotations
            .iter()
            .map(|p| DataSource { path: p.clone(), schema: inputs.schema.clone() })
            .collect(),
        ..RunConfig::default()
    };
    cfg.resolve(Path::new("."))?;
    Ok(Loaded { cfg, text: String::new(), origin: "command line".into() })
}

fn out_dir(flag: Option<PathBuf>, cfg: &RunConfig) -> PathBuf {
    flag.or_else(|| cfg.output.clone()).unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
}

fn write(path: &Path, contents: &str) -> anyhow::Result<()> {
    if let Some(dir) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

/// Whether the leak-demo opt-in is complete. Half an opt-in is an error.
fn leak_opt_in(cfg_flag: bool, flags: &LeakFlags) -> anyhow::Result<bool> {
    let first = cfg_flag || flags.leak_demo;
    if flags.allow_test_leakage && !first {
        bail!("--allow-test-leakage needs --leak-demo (or leak_demo = true in the config)");
    }
    Ok(first && flags.allow_test_leakage)
}

fn refusal(loaded: &Loaded, field: &str, what: &str) -> ConfigError {
    ConfigError {
        origin: loaded.origin.clone(),
        line: locate(&loaded.text, field),
        column: None,
        field: Some(field.to_string()),
        message: format!(
            "{what} uses test data for model selection and is refused; see docs/leakage.md. \
             To run it as a labelled leak demonstration pass --leak-demo --allow-test-leakage"
        ),
    }
}

pub fn ingest(inputs: &Inputs, out: Option<PathBuf>) -> anyhow::Result<u8> {
    let loaded = load_inputs(inputs)?;
    let dir = out_dir(out, &loaded.cfg);
    fs::create_dir_all(&dir)?;
    for t in loaded.cfg.load_tables()? {
        let path = dir.join(format!("{}.jsonl", t.dataset_id()));
        let mut buf = Vec::new();
        write_table(&t, &mut buf)?;
        fs::write(&path, buf)?;
        println!("{}: {} samples -> {}", t.dataset_id(), t.len(), path.display());
    }
    Ok(0)
}

pub fn stats(inputs: &Inputs, json: bool) -> anyhow::Result<u8> {
    let loaded = load_inputs(inputs)?;
    let tables = loaded.cfg.load_tables()?;
    if tables.is_empty() {
        bail!("no tables to summarize");
    }
    for t in &tables {
        let s = compute_stats(t)?;
        if json {
            println!("{}", serde_json::to_string(&s)?);
        } else {
            println!("{}: {}", t.dataset_id(), s.summary_line());
        }
    }
    Ok(0)
}

/// The fold plan and the tables in the order its universe indexes them.
fn build_plan(cfg: &RunConfig, tables: Vec<DatasetTable>) -> anyhow::Result<(FoldPlan, Vec<DatasetTable>)> {
    if tables.is_empty() {
        bail!("no input tables: set `data` or `synthetic` in the config");
    }
    let p = &cfg.protocol;
    Ok(match p.kind {
        ProtocolKind::Loso => (make_loso(&tables)?, tables),
        ProtocolKind::Lodo => (make_lodo(&tables)?, tables),
        ProtocolKind::Pde => (make_pde(&tables, p.folds, p.seed)?, tables),
        ProtocolKind::Holdout => {
            let test_id = p.test.as_ref().expect("checked at parse time");
            let (test, train): (Vec<DatasetTable>, Vec<DatasetTable>) =
                tables.into_iter().partition(|t| t.dataset_id() == test_id);
            let test = test.into_iter().next().with_context(|| format!("holdout test dataset {test_id} not loaded"))?;
            let refs: Vec<&DatasetTable> = train.iter().collect();
            let plan = make_holdout_multi(&refs, &test)?;
            let mut ordered = train;
            ordered.push(test);
            (plan, ordered)
        }
    })
}

pub fn plan(inputs: &Inputs, protocol: Option<ProtocolKind>, test: Option<String>, out: Option<PathBuf>) -> anyhow::Result<u8> {
    let mut loaded = load_inputs(inputs)?;
    if let Some(kind) = protocol {
        loaded.cfg.protocol.kind = kind;
    }
    if let Some(code) = test {
        loaded.cfg.protocol.test = Some(code.parse::<DatasetId>()?);
    }
    if loaded.cfg.protocol.kind == ProtocolKind::Holdout && loaded.cfg.protocol.test.is_none() {
        bail!("holdout needs --test or protocol.test");
    }
    let tables = loaded.cfg.load_tables()?;
    let (plan, _) = build_plan(&loaded.cfg, tables)?;
    let dir = out_dir(out, &loaded.cfg);
    let path = dir.join("plan.json");
    write(&path, &(serde_json::to_string_pretty(&plan)? + "\n"))?;
    println!(
        "{} plan: {} folds, universe {}, training cost {} -> {}",
        plan.protocol,
        plan.n_folds(),
        plan.universe,
        training_cost(&plan),
        path.display()
    );
    Ok(0)
}

fn predictions_csv(report: &RunReport) -> String {
    let mut s = String::from("seed,fold,sample_id,predicted,truth\n");
    for seed in &report.seeds {
        for f in &seed.folds {
            for p in &f.predictions {
                s.push_str(&format!("{},{},{},{},{}\n", seed.seed, f.fold_key, p.sample_id, p.predicted, p.truth));
            }
        }
    }
    s
}

fn exit_status(report: &RunReport, demo: bool) -> u8 {
    if !report.complete {
        status::INCOMPLETE
    } else if report.tainted() && !demo {
        status::TAINTED
    } else {
        0
    }
}

pub fn run(config: &Path, flags: &LeakFlags, out: Option<PathBuf>) -> anyhow::Result<u8> {
    let loaded = load_config(config)?;
    let cfg = &loaded.cfg;
    let demo = leak_opt_in(cfg.leak_demo, flags)?;
    if cfg.train.stopping == Stopping::EsTest && !demo {
        return Err(refusal(&loaded, "train.stopping", "ES_TEST").into());
    }
    let vocab = cfg.load_vocabulary()?;
    let (plan, tables) = build_plan(cfg, cfg.load_tables()?)?;
    let samples: Vec<_> = tables.iter().flat_map(|t| t.samples()).collect();
    let x = cfg.features.load(&samples)?;
    let data = TaskData::multilabel(&samples, &x, &vocab)?;

    let report = match &cfg.predictions {
        Some(path) => {
            let scores = read_predictions_csv(&fs::read_to_string(path)?, data.n_classes())?;
            run_external(&plan, &data, &scores)?
        }
        None => {
            let spec = cfg.model.instantiate(data.features.cols(), data.n_classes());
            let mode = if demo { AccessMode::LeakDemo } else { AccessMode::Guarded };
            run_protocol(&spec, &plan, &data, &cfg.train, &RunOptions { mode: Some(mode), ..Default::default() })?
        }
    };

    let dir = out_dir(out, cfg);
    write(&dir.join("run.json"), &report.to_json())?;
    write(&dir.join("metrics.csv"), &report.metrics.to_csv())?;
    write(&dir.join("predictions.csv"), &predictions_csv(&report))?;
    write(&dir.join("config.json"), &(serde_json::to_string_pretty(cfg)? + "\n"))?;

    let f1 = report.metric(mebench_core::metrics::MetricName::F1Macro, None);
    let state = match (report.tainted(), report.complete) {
        (false, true) => "clean",
        (true, _) => "TAINTED",
        (false, false) => "incomplete",
    };
    println!(
        "{} {} on {} folds: f1_macro {} [{state}] -> {}",
        cfg.model.name,
        plan.protocol,
        plan.n_folds(),
        f1.map_or("n/a".to_string(), |v| format!("{:.1}", v * 100.0)),
        dir.display()
    );
    if report.tainted() {
        eprintln!("warning: this run selected models on test data; its scores are not comparable (docs/leakage.md)");
    }
    Ok(exit_status(&report, demo))
}

pub fn study(config: Option<&Path>, name: Option<String>, flags: &LeakFlags, out: Option<PathBuf>) -> anyhow::Result<u8> {
    let loaded = match config {
        Some(p) => load_config(p)?,
        None => Loaded { cfg: RunConfig::default(), text: String::new(), origin: "command line".into() },
    };
    let cfg = &loaded.cfg;
    let mut spec = match (&cfg.study, &name) {
        (Some(s), _) => s.clone(),
        (None, Some(n)) => StudySpec::new(n.parse().map_err(anyhow::Error::msg)?),
        (None, None) => bail!("no study selected: pass --study or add a [study] table"),
    };
    if let Some(n) = name {
        spec.study = n.parse().map_err(anyhow::Error::msg)?;
    }
    let demo = leak_opt_in(cfg.leak_demo, flags)?;
    if spec.study == StudyKind::LeakBias && !demo {
        return Err(refusal(&loaded, "study.study", "The leak-bias study includes an ES_TEST arm that").into());
    }
    let inputs = StudyInputs {
        tables: cfg.load_tables()?,
        objective: cfg.load_objective()?,
        vocabulary: cfg.vocabulary.as_ref().map(|_| cfg.load_vocabulary()).transpose()?,
    };
    let output = run_study(&spec, &inputs)?;
    let dir = out_dir(out, cfg);
    let files = output.write(&dir)?;
    for t in &output.tables {
        println!("{}: {}", t.id, t.title);
        for r in &t.rows {
            println!("  {:<28} {}", r.label, cells(&r.cells));
        }
        for r in &t.tainted_rows {
            println!("  {:<28} {} [tainted]", r.label, cells(&r.cells));
        }
    }
    println!("wrote {} files to {}", files.len(), dir.display());
    Ok(0)
}

fn cells(c: &[Option<f64>]) -> String {
    c.iter().map(|v| v.map_or("   -".into(), |x| format!("{:>5.1}", x * 100.0))).collect::<Vec<_>>().join(" ")
}

pub fn audit(run: &Path, out: Option<PathBuf>) -> anyhow::Result<u8> {
    let text = fs::read_to_string(run).with_context(|| format!("reading {}", run.display()))?;
    let report = RunReport::from_json(&text)?;
    let verdict = report.audit();
    if verdict != report.verdict {
        bail!("{}: stored verdict does not match its access log", run.display());
    }
    println!(
        "{}: {} (mode {}, {} training-phase test reads, {})",
        run.display(),
        if verdict.clean { "clean" } else { "TAINTED" },
        verdict.mode,
        verdict.violations.len(),
        if report.complete { "complete" } else { "incomplete" }
    );
    for v in &verdict.violations {
        println!("  fold {} #{}: {}", v.fold_key, v.timestamp, v.operation);
    }
    if let Some(path) = out {
        write(&path, &(serde_json::to_string_pretty(&verdict)? + "\n"))?;
    }
    Ok(exit_status(&report, false))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_an_opt_in_is_rejected() {
        let only_allow = LeakFlags { leak_demo: false, allow_test_leakage: true };
        assert!(leak_opt_in(false, &only_allow).is_err());
        assert!(leak_opt_in(true, &only_allow).unwrap());
        assert!(!leak_opt_in(false, &LeakFlags { leak_demo: true, allow_test_leakage: false }).unwrap());
        assert!(!leak_opt_in(false, &LeakFlags::default()).unwrap());
    }

    #[test]
    fn holdout_orders_test_table_last() {
        let cfg = RunConfig::parse(
            "[protocol]\nkind = \"holdout\"\ntest = \"C2\"\n\n[synthetic]\nseed = 0\n\
             [[synthetic.datasets]]\nname = \"C2\"\nn_samples = 6\nn_subjects = 3\n\
             [[synthetic.datasets]]\nname = \"SA\"\nn_samples = 4\nn_subjects = 2\n",
            "t.toml",
        )
        .unwrap();
        let (plan, tables) = build_plan(&cfg, cfg.load_tables().unwrap()).unwrap();
        assert_eq!(tables.last().unwrap().dataset_id(), &DatasetId::Casme2);
        assert_eq!(plan.folds[0].test_idx, (4..10).collect::<Vec<_>>());
    }
}
