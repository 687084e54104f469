use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ssvep_core::signal::{load_dataset, DatasetFormat, LoadOptions};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn ssvep(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ssvep"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn synth(dir: &Path, name: &str, extra: &[&str]) -> PathBuf {
    let out = dir.join(name);
    let spec = fixture("small.spec");
    let mut args = vec!["synth", "--spec", spec.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    let o = ssvep(&args);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    out
}

#[test]
fn synth_writes_loadable_deterministic_file() {
    let dir = tempfile::tempdir().unwrap();
    let a = synth(dir.path(), "a.ssvb", &[]);
    let b = synth(dir.path(), "b.ssvb", &[]);
    let c = synth(dir.path(), "c.ssvb", &["--seed", "99"]);
    let ds = load_dataset(&a, DatasetFormat::Binary, LoadOptions::default()).unwrap();
    assert_eq!(ds.len(), 3 * 3 * 5);
    assert_eq!(ds.channel_count(), 8);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_ne!(std::fs::read(&a).unwrap(), std::fs::read(&c).unwrap());
}

#[test]
fn synth_missing_or_bad_spec_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.ssvb");
    let o = ssvep(&["synth", "--spec", "/no/such/file.spec", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    let bad = dir.path().join("bad.spec");
    std::fs::write(&bad, "n_subjects = zero\n").unwrap();
    let o = ssvep(&["synth", "--spec", bad.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("n_subjects"));
    assert!(!out.exists());
}

#[test]
fn run_prints_table_and_report_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let ds = synth(dir.path(), "d.ssvb", &[]);
    let out = dir.path().join("report.jsonl");
    let cfg = fixture("small.cfg");
    let o = ssvep(&[
        "run",
        "--dataset",
        ds.to_str().unwrap(),
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let table = stdout(&o);
    assert!(table.contains("Mean Acc."), "{table}");
    assert!(table.contains("S003"));
    let o = ssvep(&["report", "--input", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let mean = |t: &str| t.lines().find(|l| l.starts_with("Mean Acc.")).map(str::to_owned);
    assert_eq!(mean(&stdout(&o)), mean(&table));
}

#[test]
fn run_is_deterministic_across_jobs() {
    let dir = tempfile::tempdir().unwrap();
    let ds = synth(dir.path(), "d.ssvb", &[]);
    let cfg = fixture("small.cfg");
    let mut tables = Vec::new();
    for jobs in ["1", "3"] {
        let o = ssvep(&[
            "run",
            "--dataset",
            ds.to_str().unwrap(),
            "--config",
            cfg.to_str().unwrap(),
            "--jobs",
            jobs,
            "--protocol",
            "loso",
        ]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        let acc: Vec<String> = stdout(&o)
            .lines()
            .take_while(|l| !l.starts_with("Time"))
            .map(str::to_owned)
            .collect();
        tables.push(acc);
    }
    assert_eq!(tables[0], tables[1]);
}

#[test]
fn unknown_key_and_stage_mismatch_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let ds = synth(dir.path(), "d.ssvb", &[]);
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "channel = 1\nduration = 2\nclf.colour = blue\n").unwrap();
    let o = ssvep(&["run", "--dataset", ds.to_str().unwrap(), "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("clf.colour"), "{}", stderr(&o));

    let cfg = fixture("small.cfg");
    let o = ssvep(&[
        "run",
        "--dataset",
        ds.to_str().unwrap(),
        "--config",
        cfg.to_str().unwrap(),
        "--set",
        "select.method=svd",
        "--set",
        "select.d=9999",
    ]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("select.d"), "{}", stderr(&o));

    let o = ssvep(&["run", "--dataset", ds.to_str().unwrap(), "--preset", "fastest"]);
    assert_eq!(code(&o), 2);
    let o = ssvep(&["run", "--dataset", ds.to_str().unwrap(), "--protocol", "kfold"]);
    assert_eq!(code(&o), 2);
    let o = ssvep(&["frobnicate"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn failed_folds_exit_3_with_partial_report() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("one.spec");
    // one trial per class and subject leaves LDA a single sample per class
    std::fs::write(&spec, "n_subjects = 2\nn_trials_per_freq = 1\nduration = 2\n").unwrap();
    let ds = dir.path().join("one.ssvb");
    let o = ssvep(&["synth", "--spec", spec.to_str().unwrap(), "--out", ds.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let out = dir.path().join("partial.jsonl");
    let cfg = fixture("small.cfg");
    let o = ssvep(&[
        "run",
        "--dataset",
        ds.to_str().unwrap(),
        "--config",
        cfg.to_str().unwrap(),
        "--set",
        "clf.method=lda",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.contains("\"failed\":\"classifier stage failed"), "{text}");
    assert!(stdout(&o).contains("FAILED"));
}

#[test]
fn grid_ranks_and_all_infeasible_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let ds = synth(dir.path(), "d.ssvb", &[]);
    let cfg = fixture("small.cfg");
    let base = [
        "grid",
        "--dataset",
        ds.to_str().unwrap(),
        "--config",
        cfg.to_str().unwrap(),
    ];
    let mut args = base.to_vec();
    args.extend_from_slice(&["--nfft", "256,512", "--segment-len", "125,250", "--overlap", "0.5"]);
    let o = ssvep(&args);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let accs: Vec<f64> = stdout(&o)
        .lines()
        .skip(1)
        .map(|l| l.split_whitespace().nth(3).unwrap().parse().unwrap())
        .collect();
    assert_eq!(accs.len(), 4);
    assert!(accs.windows(2).all(|w| w[0] >= w[1]));

    let out = dir.path().join("grid.jsonl");
    let mut args = base.to_vec();
    args.extend_from_slice(&["--nfft", "64", "--segment-len", "128,1000", "--overlap", "0.5", "--out", out.to_str().unwrap()]);
    let o = ssvep(&args);
    assert_eq!(code(&o), 3);
    assert_eq!(stdout(&o).lines().count(), 1, "{}", stdout(&o));
    let err = stderr(&o);
    assert_eq!(err.matches("skipped nfft=64").count(), 2, "{err}");
    assert_eq!(std::fs::read_to_string(&out).unwrap().lines().count(), 2);
}

#[test]
fn inspect_summarizes() {
    let dir = tempfile::tempdir().unwrap();
    let ds = synth(dir.path(), "d.ssvb", &[]);
    let o = ssvep(&["inspect", "--dataset", ds.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let s = stdout(&o);
    assert!(s.contains("trials:      45"));
    assert!(s.contains("S002: 15 trials"));
    let o = ssvep(&["inspect", "--dataset", dir.path().join("none.ssvb").to_str().unwrap()]);
    assert_eq!(code(&o), 2);
}
