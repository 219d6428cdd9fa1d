//! The operations behind each command-line subcommand. The binary only
//! parses arguments and maps errors to exit codes.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::checkpoint::Checkpoint;
use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::nn::{levels_to_cover, receptive_field};
use crate::trainer::{self, RunOutcome, CHECKPOINT_FILE, CONFIG_FILE, METRICS_FILE};
use crate::verify::{self, Suite};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INCOMPLETE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// Exit status for a failed command.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::NonFinite(_) => EXIT_NUMERICAL,
        Error::Config(_) | Error::Io { .. } | Error::Format { .. } | Error::Checkpoint(_) => EXIT_USAGE,
        _ => EXIT_INCOMPLETE,
    }
}

#[derive(Clone, Debug, Default)]
pub struct RunRequest {
    pub config: Option<PathBuf>,
    pub preset: Option<String>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub overrides: Vec<String>,
    /// Continue the run stored in this directory.
    pub resume: Option<PathBuf>,
}

/// Expands a preset or config file plus overrides into a full config.
/// Nothing is written.
pub fn resolve_config(req: &RunRequest) -> Result<ExperimentConfig> {
    let mut cfg = match (&req.resume, &req.config, &req.preset) {
        (Some(dir), None, None) => {
            let mut cfg = ExperimentConfig::from_file(&dir.join(CONFIG_FILE))?;
            cfg.out = dir.display().to_string();
            cfg
        }
        (None, Some(path), None) => ExperimentConfig::from_file(path)?,
        (None, None, Some(name)) => ExperimentConfig::preset(name)?,
        (None, None, None) => return Err(Error::Config("one of --config, --preset or --resume is required".into())),
        _ => return Err(Error::Config("--config, --preset and --resume are mutually exclusive".into())),
    };
    if let Some(seed) = req.seed {
        cfg.seed = seed;
    }
    cfg.apply_overrides(&req.overrides)?;
    if let Some(out) = &req.out {
        cfg.out = out.display().to_string();
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn run(req: &RunRequest) -> Result<RunOutcome> {
    let cfg = resolve_config(req)?;
    let out = PathBuf::from(&cfg.out);
    if req.resume.is_some() {
        trainer::resume(&cfg, &out)
    } else {
        trainer::train(&cfg, &out)
    }
}

/// Receptive-field arithmetic: with `levels`, the field and dilations;
/// with `target`, the fewest levels whose field covers it.
pub fn rf_report(kernel_size: usize, levels: Option<usize>, base: usize, target: Option<usize>) -> Result<String> {
    if kernel_size == 0 || base == 0 {
        return Err(Error::Config("--k and --base must be at least 1".into()));
    }
    if levels.is_none() && target.is_none() {
        return Err(Error::Config("give --n, --target or both".into()));
    }
    let mut out = String::new();
    if let Some(n) = levels {
        let dilations: Vec<String> = (0..n).map(|i| base.pow(i as u32).to_string()).collect();
        let _ = writeln!(out, "receptive_field {}", receptive_field(kernel_size, n, base));
        let _ = writeln!(out, "dilations {}", dilations.join(" "));
    }
    if let Some(t) = target {
        match levels_to_cover(kernel_size, base, t, 64) {
            Some(n) => {
                let _ = writeln!(out, "min_levels {n} (receptive_field {})", receptive_field(kernel_size, n, base));
            }
            None => {
                let _ = writeln!(out, "min_levels none (k={kernel_size}, base={base} cannot reach {t})");
            }
        }
    }
    Ok(out)
}

/// Runs a property suite; returns the report and whether all checks passed.
pub fn verify_report(suite: Suite) -> Result<(String, bool)> {
    let checks = verify::run_suite(suite)?;
    let mut out = String::new();
    for c in &checks {
        let _ = writeln!(out, "{c}");
    }
    let passed = checks.iter().filter(|c| c.passed).count();
    let _ = writeln!(out, "{passed}/{} checks passed", checks.len());
    Ok((out, passed == checks.len()))
}

pub const COMPARE_HEADER: [&str; 11] = [
    "run",
    "task",
    "model",
    "params",
    "split",
    "step",
    "loss",
    "metric",
    "metric_kind",
    "fraction_of_baseline",
    "status",
];

#[derive(Clone, Debug, PartialEq)]
pub struct CompareRow {
    pub run: String,
    pub task: String,
    pub model: String,
    pub params: Option<usize>,
    pub final_row: Option<trainer::MetricsRow>,
    pub status: String,
}

impl CompareRow {
    fn record(&self) -> [String; 11] {
        let opt = |v: Option<String>| v.unwrap_or_default();
        let r = self.final_row.as_ref();
        [
            self.run.clone(),
            self.task.clone(),
            self.model.clone(),
            opt(self.params.map(|p| p.to_string())),
            opt(r.map(|r| r.split.clone())),
            opt(r.map(|r| r.step.to_string())),
            opt(r.map(|r| r.loss.to_string())),
            opt(r.map(|r| r.metric.to_string())),
            opt(r.map(|r| r.metric_kind.name().to_string())),
            opt(r.and_then(|r| r.fraction_of_baseline).map(|f| f.to_string())),
            self.status.clone(),
        ]
    }
}

fn compare_one(dir: &Path) -> CompareRow {
    let mut row = CompareRow {
        run: dir.display().to_string(),
        task: String::new(),
        model: String::new(),
        params: None,
        final_row: None,
        status: "ok".into(),
    };
    let mut problems = Vec::new();
    match ExperimentConfig::from_file(&dir.join(CONFIG_FILE)) {
        Ok(cfg) => {
            row.task = cfg.task.kind.name().into();
            row.model = cfg.model.kind.name().into();
        }
        Err(e) => problems.push(format!("config: {e}")),
    }
    match trainer::read_metrics(&dir.join(METRICS_FILE)) {
        Ok(rows) => {
            // Prefer the final test row, then any held-out row.
            let pick = rows
                .iter()
                .rev()
                .find(|r| r.split == "test")
                .or_else(|| rows.iter().rev().find(|r| r.split != "train"))
                .cloned();
            if pick.is_none() {
                problems.push("metrics: no evaluation rows".into());
            }
            row.final_row = pick;
        }
        Err(e) => problems.push(format!("metrics: {e}")),
    }
    match Checkpoint::<f32>::load(&dir.join(CHECKPOINT_FILE)) {
        Ok(ck) => row.params = Some(ck.param_count()),
        Err(e) => problems.push(format!("checkpoint: {e}")),
    }
    if !problems.is_empty() {
        row.status = format!("FAILED: {}", problems.join("; "));
    }
    row
}

/// Collects the final evaluation of each run into one table, sorted by
/// task, model and size. Incomplete runs are listed as FAILED.
pub fn compare(runs: &[PathBuf], out: &Path) -> Result<Vec<CompareRow>> {
    let mut rows: Vec<CompareRow> = runs.iter().map(|d| compare_one(d)).collect();
    rows.sort_by(|a, b| (&a.task, &a.model, a.params).cmp(&(&b.task, &b.model, b.params)));
    let mut w = csv::Writer::from_path(out)?;
    w.write_record(COMPARE_HEADER)?;
    for r in &rows {
        w.write_record(r.record())?;
    }
    w.flush().map_err(|e| Error::io(out, e))?;
    Ok(rows)
}
