use std::path::Path;
use std::process::{Command, Output};

use tcnlab::commands::{self, RunRequest};
use tcnlab::config::{ExperimentConfig, InputKind, ModelKind};
use tcnlab::optim::OptimizerKind;
use tcnlab::trainer::{CHECKPOINT_FILE, CONFIG_FILE, META_FILE, METRICS_FILE};

const TINY: &[&str] = &[
    "task.seq_len=20",
    "task.train_samples=100",
    "task.test_samples=20",
    "model.levels=2",
    "model.hidden=4",
    "train.batch_size=8",
    "train.steps=6",
    "train.eval_every=3",
];

fn tcnlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tcnlab")).args(args).output().expect("spawn tcnlab")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn run_tiny(out: &Path, preset: &str, extra: &[&str]) -> Output {
    let out = out.to_str().unwrap();
    let mut args = vec!["run", "--preset", preset, "--out", out];
    for o in TINY.iter().chain(extra) {
        args.push("--override");
        args.push(o);
    }
    tcnlab(&args)
}

#[test]
fn rf_reports_field_and_minimum_levels() {
    let o = tcnlab(&["rf", "--k", "8", "--n", "8"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("receptive_field 3571"), "{}", stdout(&o));
    assert!(stdout(&o).contains("dilations 1 2 4 8 16 32 64 128"));

    let o = tcnlab(&["rf", "--k", "1", "--n", "5"]);
    assert!(stdout(&o).contains("receptive_field 1"));

    let o = tcnlab(&["rf", "--k", "3", "--target", "784"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("min_levels 8 (receptive_field 1021)"), "{}", stdout(&o));

    let o = tcnlab(&["rf", "--k", "1", "--target", "10"]);
    assert!(stdout(&o).contains("min_levels none"));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(tcnlab(&["rf", "--k", "3"]).status.code(), Some(2));
    assert_eq!(tcnlab(&["bogus"]).status.code(), Some(2));
    assert_eq!(tcnlab(&["verify", "--suite", "nope"]).status.code(), Some(2));
    assert_eq!(tcnlab(&["run", "--preset", "no-such-preset"]).status.code(), Some(2));
}

#[test]
fn unknown_override_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = run_tiny(&out, "adding-t50-tcn-tiny", &["model.colour=blue"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("model.colour"));
    assert!(!out.exists());
}

#[test]
fn verify_suites_exit_0() {
    for suite in ["gradcheck", "causality"] {
        let o = tcnlab(&["verify", "--suite", suite]);
        assert_eq!(o.status.code(), Some(0), "{suite}: {}", stdout(&o));
        assert!(stdout(&o).contains("checks passed"));
    }
}

#[test]
fn presets_lists_every_builtin() {
    let o = tcnlab(&["presets"]);
    let listed: Vec<String> = stdout(&o).lines().map(String::from).collect();
    let expected: Vec<String> = tcnlab::config::preset_names().map(String::from).collect();
    assert_eq!(listed, expected);
    assert!(listed.iter().any(|n| n == "copy-t1000-tcn"));
}

#[test]
fn divergence_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_tiny(&dir.path().join("run"), "adding-t50-tcn-tiny", &["optim.kind=sgd", "optim.lr=1e30", "optim.grad_clip=none"]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn cli_and_library_runs_are_identical() {
    let dir = tempfile::tempdir().unwrap();
    let via_cli = dir.path().join("cli");
    let via_lib = dir.path().join("lib");
    let o = run_tiny(&via_cli, "adding-t50-tcn-tiny", &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));

    let req = RunRequest {
        preset: Some("adding-t50-tcn-tiny".into()),
        out: Some(via_lib.clone()),
        overrides: TINY.iter().map(|s| s.to_string()).collect(),
        ..Default::default()
    };
    commands::run(&req).unwrap();
    for file in [METRICS_FILE, CHECKPOINT_FILE, META_FILE] {
        let a = std::fs::read(via_cli.join(file)).unwrap();
        let b = std::fs::read(via_lib.join(file)).unwrap();
        assert!(a == b, "{file} differs");
    }
    // The resolved configs differ only in where they were written.
    let without_out = |dir: &Path| -> Vec<String> {
        let text = std::fs::read_to_string(dir.join(CONFIG_FILE)).unwrap();
        text.lines().filter(|l| !l.starts_with("out")).map(String::from).collect()
    };
    assert_eq!(without_out(&via_cli), without_out(&via_lib));
}

#[test]
fn compare_tabulates_and_flags_broken_runs() {
    let dir = tempfile::tempdir().unwrap();
    let tcn = dir.path().join("tcn");
    let lstm = dir.path().join("lstm");
    assert_eq!(run_tiny(&tcn, "adding-t50-tcn-tiny", &[]).status.code(), Some(0));
    assert_eq!(run_tiny(&lstm, "adding-t200-lstm", &["model.hidden=4"]).status.code(), Some(0));

    let table = dir.path().join("table.csv");
    let o = tcnlab(&["compare", "--runs", tcn.to_str().unwrap(), lstm.to_str().unwrap(), "--out", table.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let mut rd = csv::Reader::from_path(&table).unwrap();
    let header = rd.headers().unwrap().clone();
    let rows: Vec<csv::StringRecord> = rd.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 2);
    let col = |name: &str| header.iter().position(|h| h == name).unwrap();
    for r in &rows {
        assert_eq!(&r[col("status")], "ok");
        assert!(r[col("params")].parse::<usize>().unwrap() > 0);
        assert_eq!(&r[col("task")], "adding");
    }

    std::fs::remove_file(lstm.join(METRICS_FILE)).unwrap();
    let o = tcnlab(&["compare", "--runs", tcn.to_str().unwrap(), lstm.to_str().unwrap(), "--out", table.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let text = std::fs::read_to_string(&table).unwrap();
    assert!(text.contains("FAILED"), "{text}");
}

#[test]
fn copy_t1000_preset_settings() {
    let cfg = ExperimentConfig::preset("copy-t1000-tcn").unwrap();
    assert_eq!(cfg.task.seq_len, 1000);
    assert_eq!(cfg.model.kind, ModelKind::Tcn);
    assert_eq!((cfg.model.kernel_size, cfg.model.levels, cfg.model.hidden), (8, 8, 10));
    assert_eq!(cfg.model.input, InputKind::Embedding);
    assert_eq!(cfg.optim.kind, OptimizerKind::RmsProp);
    assert_eq!(cfg.optim.grad_clip, Some(1.0));
}
