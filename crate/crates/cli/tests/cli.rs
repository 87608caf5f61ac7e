// SPDX-License-Identifier: Apache-2.0

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").canonicalize().unwrap()
}

fn mebench(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mebench"))
        .args(args)
        .current_dir(root())
        .env_remove("MEBENCH_OUT")
        .env_remove("MEBENCH_JOBS")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// A small LOSO config over the CASME II fixture.
fn small_config(dir: &Path, stopping: &str) -> PathBuf {
    let root = root();
    let text = format!(
        "schemas = \"{}\"\n\n[[data]]\npath = \"{}\"\nschema = \"casme2\"\n\n[protocol]\nkind = \"loso\"\n\n\
         [model]\nname = \"MLP\"\nkind = \"mlp\"\nhidden = [8]\n\n\
         [train]\nmax_epochs = 4\nlearning_rate = 5e-3\nstopping = \"{stopping}\"\nseeds = [0, 1]\n\n\
         [features]\nsource = \"synthetic\"\ndim = 8\n",
        root.join("schemas").display(),
        root.join("fixtures/casme2_annotations.csv").display()
    );
    let path = dir.join(format!("{stopping}.toml"));
    fs::write(&path, text).unwrap();
    path
}

#[test]
fn stats_on_casme2_fixture_prints_the_published_row() {
    let o = mebench(&["stats", "fixtures/casme2_annotations.csv", "--schema", "casme2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o).trim(), "C2: samples 256, subjects 26, AU sequences 373, cardinality 1.46");
}

#[test]
fn ingested_tables_give_the_same_stats() {
    let dir = tempfile::tempdir().unwrap();
    let o = mebench(&["ingest", "fixtures/samm_annotations.csv", "--schema", "samm", "-o", s(dir.path())]);
    assert!(o.status.success(), "{}", stderr(&o));
    let table = dir.path().join("SA.jsonl");
    let o = mebench(&["stats", s(&table)]);
    assert_eq!(stdout(&o).trim(), "SA: samples 159, subjects 29, AU sequences 226, cardinality 1.42");
}

#[test]
fn lodo_plan_over_six_tables_has_six_folds() {
    let dir = tempfile::tempdir().unwrap();
    let o = mebench(&["plan", "-c", "configs/run_lodo_constant.toml", "--protocol", "lodo", "-o", s(dir.path())]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("training cost 12186"), "{}", stdout(&o));
    let plan: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("plan.json")).unwrap()).unwrap();
    let keys: Vec<&str> = plan["folds"].as_array().unwrap().iter().map(|f| f["fold_key"].as_str().unwrap()).collect();
    assert_eq!(keys, ["C1", "C2", "SA", "4D", "MM", "C3"]);
}

#[test]
fn es_test_is_refused_without_both_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "ES_TEST");
    let out = dir.path().join("out");
    for extra in [&[][..], &["--leak-demo"][..]] {
        let mut args = vec!["run", "-c", s(&cfg), "-o", s(&out)];
        args.extend_from_slice(extra);
        let o = mebench(&args);
        assert_eq!(o.status.code(), Some(2));
        assert!(stderr(&o).contains("docs/leakage.md"), "{}", stderr(&o));
        assert!(stderr(&o).contains("train.stopping"), "{}", stderr(&o));
        assert!(!out.exists(), "nothing is written before the refusal");
    }
    let o = mebench(&["run", "-c", s(&cfg), "-o", s(&out), "--allow-test-leakage"]);
    assert_eq!(o.status.code(), Some(1), "half an opt-in is an error");
}

#[test]
fn leak_demo_runs_are_tainted_and_fail_audit() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "ES_TEST");
    let out = dir.path().join("out");
    let o = mebench(&["run", "-c", s(&cfg), "-o", s(&out), "--leak-demo", "--allow-test-leakage"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("TAINTED"));
    let o = mebench(&["audit", s(&out.join("run.json"))]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stdout(&o).contains("mode leak-demo"));
}

#[test]
fn clean_run_exits_zero_and_audit_is_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "ES_VALIDATION");
    let out = dir.path().join("out");
    let o = mebench(&["run", "-c", s(&cfg), "-o", s(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for f in ["run.json", "metrics.csv", "predictions.csv", "config.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let run = out.join("run.json");
    let before = fs::read(&run).unwrap();
    let v = dir.path().join("verdict.json");
    let a = mebench(&["audit", s(&run), "-o", s(&v)]);
    let first = fs::read(&v).unwrap();
    let b = mebench(&["audit", s(&run), "-o", s(&v)]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(b.status.code(), Some(0));
    assert_eq!(stdout(&a), stdout(&b));
    assert_eq!(first, fs::read(&v).unwrap());
    assert_eq!(before, fs::read(&run).unwrap(), "audit does not touch the run");
    let verdict: serde_json::Value = serde_json::from_slice(&first).unwrap();
    assert_eq!(verdict["clean"], true);
}

#[test]
fn runs_are_byte_identical_across_invocations_and_job_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "ES_VALIDATION");
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(mebench(&["--jobs", "1", "run", "-c", s(&cfg), "-o", s(&a)]).status.success());
    assert!(mebench(&["--jobs", "3", "run", "-c", s(&cfg), "-o", s(&b)]).status.success());
    for f in ["run.json", "metrics.csv", "predictions.csv", "config.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn output_directory_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_mebench"))
        .args(["study", "--study", "f1-variants"])
        .current_dir(root())
        .env("MEBENCH_OUT", dir.path())
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(dir.path().join("f1-variants.csv").exists());
    assert!(dir.path().join("provenance.json").exists());
}

#[test]
fn config_errors_name_line_and_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[protocol]\nkind = \"lodo\"\n\n[train]\nmax_epochs = \"ten\"\n").unwrap();
    let o = mebench(&["run", "-c", s(&cfg)]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("bad.toml:5:"), "{err}");
    assert!(err.contains("train.max_epochs"), "{err}");

    fs::write(&cfg, "[[data]]\npath = \"missing.csv\"\n").unwrap();
    let o = mebench(&["run", "-c", s(&cfg)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("data[0].path"), "{}", stderr(&o));
}

#[test]
fn leak_bias_study_needs_the_opt_in() {
    let o = mebench(&["study", "--study", "leak-bias"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("docs/leakage.md"));
}

#[test]
fn report_segregates_tainted_runs() {
    let dir = tempfile::tempdir().unwrap();
    let clean = dir.path().join("clean");
    let leak = dir.path().join("leak");
    let c1 = small_config(dir.path(), "ES_VALIDATION");
    let c2 = small_config(dir.path(), "ES_TEST");
    assert!(mebench(&["run", "-c", s(&c1), "-o", s(&clean)]).status.success());
    assert!(mebench(&["run", "-c", s(&c2), "-o", s(&leak), "--leak-demo", "--allow-test-leakage"]).status.success());
    let rep = dir.path().join("report");
    let o = mebench(&["report", s(&clean), s(&leak), "-o", s(&rep)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(rep.join("runs.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("clean,\"clean "), "{csv}");
    assert!(lines[2].starts_with("tainted,\"leak "), "{csv}");
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(rep.join("report.json")).unwrap()).unwrap();
    assert_eq!(json[0]["ranking"].as_array().unwrap().len(), 1);
    assert!(fs::read_to_string(rep.join("runs.svg")).unwrap().contains("[tainted]"));
}

#[test]
fn shipped_configs_parse() {
    for entry in fs::read_dir(root().join("configs")).unwrap() {
        let path = entry.unwrap().path();
        let o = mebench(&["plan", "-c", s(&path), "-o", s(&std::env::temp_dir().join("mebench-plan-check"))]);
        // self-contained studies have no tables to plan over
        let err = stderr(&o);
        assert!(o.status.success() || err.contains("no input tables"), "{}: {err}", path.display());
    }
}
