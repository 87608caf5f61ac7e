// SPDX-License-Identifier: Apache-2.0

//! Acceptance suite. One PASS/FAIL line per criterion; exits nonzero if any
//! criterion fails.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use mebench_core::data::{
    generate_synthetic, parse_annotations, AuCode, DatasetId, DatasetTable, Sample, SchemaRegistry, SyntheticDataset,
    SyntheticSpec,
};
use mebench_core::experiments::constants::{cd6me_marginal_tables, composite_counts, composite_size};
use mebench_core::experiments::{
    run_study, study_cd6me, study_emotion_from_aus, study_f1_variants, study_leak_bias, F1VariantSpec, FeatureSource,
    LabelKind, LeakBiasSpec, StudyInputs, StudyKind, StudySpec,
};
use mebench_core::features::{compute_flow, compute_strain, FlowField, FlowParams, GrayImage, SyntheticFeatureSpec};
use mebench_core::labels::{AuVocabulary, ObjectiveMap};
use mebench_core::learn::{run_protocol, Matrix, ModelSpec, RunOptions, Stopping, TaskData, TrainConfig};
use mebench_core::metrics::{f1_binary, f1_harmonic, f1_macro, ClassCounts, ConfusionCounts};
use mebench_core::protocols::{
    make_holdout_multi, make_lodo, make_loso, make_loso_with_auxiliary, make_pde, training_cost, FoldPlan, PlanKeys,
    Protocol,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn fixture(file: &str, schema: &str) -> DatasetTable {
    let registry = SchemaRegistry::load_dir(root().join("schemas")).expect("schemas");
    let raw = fs::read_to_string(root().join("fixtures").join(file)).expect("fixture");
    parse_annotations(&raw, registry.get(schema).expect("schema")).expect("parse")
}

fn objective_map(file: &str) -> ObjectiveMap {
    ObjectiveMap::from_toml(&fs::read_to_string(root().join("rules").join(file)).expect("rules")).expect("map")
}

fn within(got: &[f64], want: &[f64], tol: f64) -> (bool, f64) {
    let worst = got.iter().zip(want).map(|(g, w)| (g - w).abs()).fold(0.0, f64::max);
    (got.len() == want.len() && worst <= tol, worst)
}

fn fmt_row(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.2}")).collect::<Vec<_>>().join(" ")
}

// 1 ---------------------------------------------------------------------

const CONSTANT_PER_AU: [f64; 13] = [26.0, 24.2, 51.7, 12.4, 5.7, 22.1, 10.9, 7.1, 15.9, 24.0, 5.0, 8.1, 17.8];
const COMPOSITE_POSITIVES: [usize; 12] = [304, 280, 708, 134, 60, 252, 117, 75, 176, 277, 52, 86];
const CONSTANT_PER_DATASET: [f64; 7] = [16.1, 19.4, 15.3, 20.2, 20.7, 15.1, 17.8];

fn quick_features() -> FeatureSource {
    FeatureSource::Synthetic(SyntheticFeatureSpec { dim: 2, ..Default::default() })
}

fn constant_study() -> mebench_core::experiments::Cd6meOutcome {
    let tables = cd6me_marginal_tables(0).expect("tables");
    study_cd6me(&tables, &[], &quick_features(), &AuVocabulary::cd6me(), &TrainConfig::default()).expect("study")
}

fn c1_constant_per_au() -> Verdict {
    if composite_size() != 2031 || composite_counts() != COMPOSITE_POSITIVES {
        return verdict(false, format!("marginals n={} {:?}", composite_size(), composite_counts()));
    }
    let out = constant_study();
    let row = &out.per_au.rows[0];
    let got: Vec<f64> = row.cells.iter().map(|c| 100.0 * c.unwrap_or(f64::NAN)).collect();
    let (ok, worst) = within(&got, &CONSTANT_PER_AU, 0.05);
    verdict(ok && row.label == "Constant", format!("{} | max dev {worst:.3}", fmt_row(&got)))
}

// 2 ---------------------------------------------------------------------

fn c2_constant_per_dataset() -> Verdict {
    let out = constant_study();
    let row = &out.per_dataset.rows[0];
    let got: Vec<f64> = row.cells.iter().map(|c| 100.0 * c.unwrap_or(f64::NAN)).collect();
    let (ok, worst) = within(&got, &CONSTANT_PER_DATASET, 0.05);
    let order = out.per_dataset.columns.join(",");
    verdict(ok && order == "C1,C2,SA,4D,MM,C3,Average", format!("{} | max dev {worst:.3}", fmt_row(&got)))
}

// 3 ---------------------------------------------------------------------

fn sized(name: &str, n: usize, subjects: usize) -> SyntheticDataset {
    SyntheticDataset { name: name.into(), n_samples: n, n_subjects: subjects, au_counts: BTreeMap::new() }
}

fn c3_costs() -> Verdict {
    let megc = SyntheticSpec {
        seed: 0,
        datasets: vec![sized("smic", 164, 16), sized("C2", 145, 24), sized("SA", 133, 28)],
        emotion: None,
        noise_rate: 0.0,
    };
    let loso = make_loso(&generate_synthetic(&megc).expect("tables")).expect("plan");
    let lodo = make_lodo(&cd6me_marginal_tables(0).expect("tables")).expect("plan");
    let (a, b) = (training_cost(&loso), training_cost(&lodo));
    verdict(
        a == 30_056 && b == 12_186 && loso.n_folds() == 68 && lodo.n_folds() == 6,
        format!("LOSO {}x{} = {a}, LODO {}x{} = {b}", loso.n_folds(), loso.universe, lodo.n_folds(), lodo.universe),
    )
}

// 4 ---------------------------------------------------------------------

/// Per-class F1 from raw label vectors, one class at a time.
fn brute_macro(pred: &[usize], truth: &[usize], k: usize) -> f64 {
    let mut sum = 0.0;
    for c in 0..k {
        let (mut tp, mut fp, mut fn_) = (0u64, 0u64, 0u64);
        for (&p, &t) in pred.iter().zip(truth) {
            match (p == c, t == c) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fn_ += 1,
                _ => {}
            }
        }
        let d = 2 * tp + fp + fn_;
        sum += if d == 0 { 0.0 } else { (2 * tp) as f64 / d as f64 };
    }
    sum / k as f64
}

fn c4_metric_identities() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    let mut compared = 0;
    for _ in 0..10_000 {
        let c = ClassCounts::new(rng.random_range(0..500), rng.random_range(0..500), rng.random_range(0..500), rng.random_range(0..500));
        if let Some(h) = f1_harmonic(&c) {
            worst = worst.max((h - f1_binary(&c)).abs());
            compared += 1;
        }
    }
    let mut mismatches = 0;
    for _ in 0..1_000 {
        let k = rng.random_range(2..9);
        let n = rng.random_range(1..200);
        let truth: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
        let pred: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
        let labels = (0..k).map(|i| format!("c{i}")).collect();
        let m = f1_macro(&ConfusionCounts::from_multiclass(&pred, &truth, labels).expect("counts"));
        if m != brute_macro(&pred, &truth, k) {
            mismatches += 1;
        }
    }
    verdict(
        worst <= 1e-12 && mismatches == 0,
        format!("count form vs harmonic form max |diff| {worst:.1e} over {compared} defined cases; macro mismatches {mismatches}/1000"),
    )
}

// 5 ---------------------------------------------------------------------

fn c5_fold_averaging() -> Verdict {
    let mut below = 0;
    for seed in 0..100 {
        let (_, v, _) = study_f1_variants(&F1VariantSpec { seed, ..Default::default() });
        below += usize::from(v.macro_folds < v.macro_);
    }
    verdict(below >= 95, format!("f1_macro_folds < f1_macro in {below}/100 seeds"))
}

// 6 ---------------------------------------------------------------------

fn c6_leak_bias() -> Verdict {
    let mut spec = LeakBiasSpec::default();
    spec.train.seeds = (0..20).collect();
    let out = study_leak_bias(&spec).expect("study");
    let es = out.arm(Stopping::EsTest).mean;
    let fixed = out.arm(Stopping::FixedEpoch).mean;
    // independent dominance count straight from the traces
    let (mut folds, mut dominated) = (0, 0);
    for r in out.reports.iter().filter(|r| r.config.stopping == Stopping::EsTest) {
        for s in &r.seeds {
            for f in &s.folds {
                let scores: Vec<f64> = f.trace.epochs.iter().filter_map(|e| e.test_f1).collect();
                let chosen = f.trace.epochs.iter().find(|e| e.epoch == f.selected_epoch).and_then(|e| e.test_f1);
                folds += 1;
                if let Some(c) = chosen {
                    dominated += usize::from(scores.len() == f.trace.epochs.len() && scores.iter().all(|&x| c >= x));
                }
            }
        }
    }
    let tainted_ok = out.table.tainted_rows.iter().any(|r| r.label == "ES_TEST");
    verdict(
        es > fixed && folds > 0 && dominated == folds && out.dominance.dominated == out.dominance.folds && tainted_ok,
        format!("ES_TEST {:.1} > FIXED_EPOCH {:.1}; dominance {dominated}/{folds} folds", 100.0 * es, 100.0 * fixed),
    )
}

// 7 ---------------------------------------------------------------------

/// Smallest |pre-activation| over all hidden units, recomputed from the flat
/// layout (per layer: `dout x din` weights row-major, then `dout` biases).
fn hidden_margin(widths: &[usize], p: &[f64], x: &[Vec<f64>]) -> f64 {
    let mut margin = f64::INFINITY;
    for row in x {
        let mut a = row.clone();
        let mut off = 0;
        for l in 0..widths.len() - 2 {
            let (din, dout) = (widths[l], widths[l + 1]);
            let z: Vec<f64> = (0..dout)
                .map(|o| p[off + din * dout + o] + (0..din).map(|i| p[off + o * din + i] * a[i]).sum::<f64>())
                .collect();
            off += din * dout + dout;
            margin = z.iter().fold(margin, |m, v| m.min(v.abs()));
            a = z.into_iter().map(|v| v.max(0.0)).collect();
        }
    }
    margin
}

fn c7_gradients() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    let h = 1e-3;
    let mut redrawn = 0;
    for _ in 0..50 {
        let d = rng.random_range(2..6);
        let c = rng.random_range(1..5);
        let n = rng.random_range(2..8);
        let hidden: Vec<usize> = (0..rng.random_range(1..3)).map(|_| rng.random_range(2..7)).collect();
        let mut widths = vec![d];
        widths.extend(&hidden);
        widths.push(c);
        let spec = ModelSpec::mlp(d, hidden, c);
        // redraw until no ReLU sits within reach of the stencil
        let (p, rows) = loop {
            let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
            let p = spec.init(rng.random());
            if hidden_margin(&widths, &p, &rows) > 0.02 {
                break (p, rows);
            }
            redrawn += 1;
        };
        let x = Matrix::new(n, d, rows.concat()).expect("matrix");
        let y: Vec<u8> = (0..n * c).map(|_| u8::from(rng.random_bool(0.4))).collect();
        let (_, g) = spec.loss_and_grad(&p, &x, &y).expect("grad");
        for i in 0..p.len() {
            let at = |d: f64| {
                let mut q = p.clone();
                q[i] += d;
                spec.loss(&q, &x, &y).expect("loss")
            };
            let fd = (-at(2.0 * h) + 8.0 * at(h) - 8.0 * at(-h) + at(-2.0 * h)) / (12.0 * h);
            let rel = (g[i] - fd).abs() / g[i].abs().max(fd.abs()).max(1e-7);
            worst = worst.max(rel);
        }
    }
    verdict(
        worst < 1e-6,
        format!("max relative error {worst:.2e} over 50 MLPs (five-point central differences, h = {h:.0e}; {redrawn} near-kink draws skipped)"),
    )
}

// 8 ---------------------------------------------------------------------

fn c8_objective_determinism() -> Verdict {
    let fixtures = vec![fixture("casme2_annotations.csv", "casme2"), fixture("samm_annotations.csv", "samm")];
    let synthetic = cd6me_marginal_tables(3).expect("tables");
    let mut rows = 0;
    let mut perfect = 0;
    for file in ["objective_7class.toml", "megc2018_5class.toml"] {
        let map = objective_map(file);
        for tables in [&fixtures, &synthetic] {
            let t = study_emotion_from_aus(tables, LabelKind::Objective, Some(&map), None).expect("study");
            for r in &t.rows {
                rows += 1;
                perfect += usize::from(r.cells[0].map(|v| 100.0 * v) == Some(100.0));
            }
        }
    }
    verdict(rows == 16 && perfect == rows, format!("{perfect}/{rows} rows at exactly 100.0 (2 fixtures + 6 synthetic, 2 maps)"))
}

// 9 ---------------------------------------------------------------------

fn random_tables(rng: &mut ChaCha8Rng, n_tables: usize, tag: &str) -> Vec<DatasetTable> {
    let au = AuCode::new(1).expect("au");
    (0..n_tables)
        .map(|k| {
            let id = DatasetId::Synthetic(format!("{tag}{k}"));
            let mut samples = Vec::new();
            for s in 0..rng.random_range(1..6) {
                for i in 0..rng.random_range(1..4) {
                    let sid = format!("{id}/{s}/{i}");
                    samples.push(Sample::new(sid, id.clone(), format!("s{s}"), 0, 1, Some(2), [au]).expect("sample"));
                }
            }
            DatasetTable::new(id, samples).expect("table")
        })
        .collect()
}

/// Universe-order dataset and subject of every index.
fn identities(tables: &[&DatasetTable]) -> (Vec<String>, Vec<String>) {
    let all: Vec<&Sample> = tables.iter().flat_map(|t| t.samples()).collect();
    (
        all.iter().map(|s| s.dataset_id.to_string()).collect(),
        all.iter().map(|s| format!("{}|{}", s.dataset_id, s.subject_id)).collect(),
    )
}

/// Plan problems found without the library's own checker.
fn oracle(plan: &FoldPlan, ds: &[String], subj: &[String]) -> Vec<String> {
    let mut bad = Vec::new();
    let n = ds.len();
    let evaluated = plan.auxiliary_start.unwrap_or(n);
    if plan.universe != n {
        bad.push("universe size".to_string());
        return bad;
    }
    let mut tested = vec![0usize; n];
    for f in &plan.folds {
        let train: BTreeSet<usize> = f.train_idx.iter().copied().collect();
        let test: BTreeSet<usize> = f.test_idx.iter().copied().collect();
        if test.is_empty() || train.is_empty() || !train.is_disjoint(&test) {
            bad.push(format!("{}: empty or overlapping sides", f.fold_key));
        }
        if train.len() + test.len() != n {
            bad.push(format!("{}: sides do not cover the universe", f.fold_key));
        }
        if test.iter().any(|&i| i >= evaluated) {
            bad.push(format!("{}: auxiliary sample tested", f.fold_key));
        }
        for &i in &test {
            tested[i] += 1;
        }
        let key_overlap = |by: &[String]| {
            let tr: BTreeSet<&String> = train.iter().map(|&i| &by[i]).collect();
            test.iter().any(|&i| tr.contains(&by[i]))
        };
        match plan.protocol {
            Protocol::Loso => {
                let keys: BTreeSet<&String> = test.iter().map(|&i| &subj[i]).collect();
                if keys.len() != 1 || key_overlap(subj) {
                    bad.push(format!("{}: subject leak", f.fold_key));
                }
            }
            Protocol::Lodo | Protocol::Holdout => {
                let keys: BTreeSet<&String> = test.iter().map(|&i| &ds[i]).collect();
                if keys.len() != 1 || key_overlap(ds) {
                    bad.push(format!("{}: dataset leak", f.fold_key));
                }
            }
            Protocol::Pde => {}
        }
    }
    if plan.protocol != Protocol::Holdout && tested[..evaluated].iter().any(|&t| t != 1) {
        bad.push("test sets are not a partition".into());
    }
    bad
}

fn c9_plan_invariants() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (mut generated, mut refused, mut violations) = (0, 0, 0);
    let mut first = None;
    for t in 0..10_000 {
        let n_tables = rng.random_range(1..5);
        let tables = random_tables(&mut rng, n_tables, &format!("p{t}-"));
        let refs: Vec<&DatasetTable> = tables.iter().collect();
        let built = match rng.random_range(0..5) {
            0 => make_loso(&tables).map(|p| (p, refs.clone())),
            1 => make_lodo(&tables).map(|p| (p, refs.clone())),
            2 => make_pde(&tables, rng.random_range(2..5), rng.random()).map(|p| (p, refs.clone())),
            3 => {
                let test = rng.random_range(0..tables.len());
                let train: Vec<&DatasetTable> = refs.iter().enumerate().filter(|(i, _)| *i != test).map(|(_, t)| *t).collect();
                let mut order = train.clone();
                order.push(refs[test]);
                make_holdout_multi(&train, refs[test]).map(|p| (p, order))
            }
            _ => {
                let split = rng.random_range(1..=tables.len());
                make_loso_with_auxiliary(&tables[..split], &tables[split..]).map(|p| (p, refs.clone()))
            }
        };
        let Ok((plan, order)) = built else {
            refused += 1;
            continue;
        };
        generated += 1;
        let (ds, subj) = identities(&order);
        let mut bad = oracle(&plan, &ds, &subj);
        bad.extend(plan.violations(&PlanKeys::from_tables(order.iter().copied())));
        if !bad.is_empty() {
            violations += 1;
            first.get_or_insert_with(|| format!("{} plan: {}", plan.protocol, bad.join("; ")));
        }
    }
    verdict(
        violations == 0 && generated > 5_000,
        format!(
            "{generated} plans generated, {refused} degenerate inputs refused, {violations} with violations{}",
            first.map(|f| format!(" (first: {f})")).unwrap_or_default()
        ),
    )
}

// 10 --------------------------------------------------------------------

fn texture(dx: f64) -> GrayImage {
    use std::f64::consts::PI;
    GrayImage::from_fn(48, 40, |x, y| {
        let (x, y) = (x as f64 - dx, y as f64);
        128.0 + 50.0 * (2.0 * PI * x / 17.0).sin() * (2.0 * PI * y / 23.0).cos() + 30.0 * (2.0 * PI * (x + y) / 29.0).sin()
    })
}

fn c10_flow_oracles() -> Verdict {
    let constant = compute_strain(FlowField::from_fn(20, 16, |_, _| (2.5, -1.25)));
    let max_const = constant.strain.as_ref().expect("strain").iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let linear = compute_strain(FlowField::from_fn(20, 16, |x, _| (x as f64, 0.0)));
    let s = linear.strain.as_ref().expect("strain");
    let mut worst_lin: f64 = 0.0;
    for y in 1..15 {
        for x in 1..19 {
            worst_lin = worst_lin.max((s[y * 20 + x] - 1.0).abs());
        }
    }
    let flow = compute_flow(&texture(0.0), &texture(1.0), FlowParams::default()).expect("flow");
    let (mu, _) = flow.interior_mean(4);
    verdict(
        max_const <= 1e-12 && worst_lin <= 1e-9 && (0.7..=1.3).contains(&mu),
        format!("constant-flow strain max {max_const:.1e}; |strain(u=x) - 1| max {worst_lin:.1e}; 1-px shift mean u {mu:.3}"),
    )
}

// 11 --------------------------------------------------------------------

fn run_json(threads: usize) -> String {
    let c2 = fixture("casme2_annotations.csv", "casme2");
    let samples: Vec<&Sample> = c2.samples().iter().collect();
    let x = mebench_core::features::synthesize_features(&samples, &SyntheticFeatureSpec { dim: 8, ..Default::default() })
        .expect("features");
    let vocab = AuVocabulary::cd6me();
    let data = TaskData::multilabel(&samples, &x, &vocab).expect("data");
    let plan = make_loso(std::slice::from_ref(&c2)).expect("plan");
    let spec = ModelSpec::mlp(8, vec![8], vocab.len());
    let cfg = TrainConfig {
        max_epochs: 4,
        learning_rate: 5e-3,
        stopping: Stopping::EsValidation,
        seeds: vec![0, 1],
        ..Default::default()
    };
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().expect("pool");
    pool.install(|| run_protocol(&spec, &plan, &data, &cfg, &RunOptions::default()).expect("run").to_json())
}

fn c11_determinism() -> Verdict {
    let a = run_json(1);
    let b = run_json(1);
    let c = run_json(4);
    let study = || {
        let mut spec = StudySpec::new(StudyKind::Cd6meBenchmark);
        spec.models = vec![mebench_core::experiments::ModelTemplate::mlp("MLP", vec![4])];
        spec.train = TrainConfig { max_epochs: 2, learning_rate: 1e-3, seeds: vec![0], ..Default::default() };
        spec.features = quick_features();
        let inputs = StudyInputs { tables: cd6me_marginal_tables(1).expect("tables"), ..Default::default() };
        run_study(&spec, &inputs).expect("study").to_json()
    };
    let (s1, s2) = (study(), study());
    verdict(
        a == b && a == c && s1 == s2,
        format!("run report {} bytes, identical x3 (1, 1, 4 threads); study output {} bytes, identical x2", a.len(), s1.len()),
    )
}

// -----------------------------------------------------------------------

type Criterion = (u32, &'static str, Option<Duration>, fn() -> Verdict);

fn main() {
    let criteria: [Criterion; 11] = [
        (1, "constant row per AU", Some(Duration::from_secs(1)), c1_constant_per_au),
        (2, "constant row per held-out dataset", Some(Duration::from_secs(1)), c2_constant_per_dataset),
        (3, "training cost identities", None, c3_costs),
        (4, "F1 identities", None, c4_metric_identities),
        (5, "fold-averaging bias direction", Some(Duration::from_secs(30)), c5_fold_averaging),
        (6, "early-stopping leak bias", Some(Duration::from_secs(300)), c6_leak_bias),
        (7, "MLP gradient check", None, c7_gradients),
        (8, "objective labels from AUs", None, c8_objective_determinism),
        (9, "fold-plan invariants", None, c9_plan_invariants),
        (10, "flow and strain oracles", None, c10_flow_oracles),
        (11, "byte-identical reports", None, c11_determinism),
    ];
    // optional criterion ids on the command line restrict the run
    let only: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let selected: Vec<Criterion> = criteria.into_iter().filter(|c| only.is_empty() || only.contains(&c.0)).collect();
    let mut failed = 0;
    for &(id, name, limit, f) in &selected {
        let start = Instant::now();
        let v = f();
        let took = start.elapsed();
        let in_time = limit.is_none_or(|l| took <= l);
        let pass = v.pass && in_time;
        failed += usize::from(!pass);
        let budget = limit.map(|l| format!(" / limit {:.0} s", l.as_secs_f64())).unwrap_or_default();
        println!(
            "{} [{id:>2}] {name}: {} ({:.2} s{budget}{})",
            if pass { "PASS" } else { "FAIL" },
            v.detail,
            took.as_secs_f64(),
            if in_time { "" } else { ", over time limit" }
        );
    }
    println!("{}/{} criteria passed", selected.len() - failed, selected.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
