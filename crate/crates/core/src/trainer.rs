//! Deterministic training and evaluation runs.
//!
//! A run directory holds the resolved `config.txt`, `metrics.csv`,
//! `checkpoint.bin` and `run_meta.txt`. Every random draw comes from a
//! stream derived from the master seed and the step (or epoch) it serves,
//! so a resumed run continues exactly where an uninterrupted one would.

use std::fmt::Write as _;
use std::fs::File;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::Tape;
use crate::checkpoint::Checkpoint;
use crate::config::{stream_seed, ExperimentConfig, BUNDLED_CORPUS};
use crate::error::{Error, Result};
use crate::nn::SequenceModel;
use crate::optim::{Optimizer, PlateauScheduler};
use crate::tasks::{
    self, baseline_loss, CharCorpus, LossKind, MnistSet, SplitFractions, TaskBatch, TaskKind, Targets,
};
use crate::tensor::Tensor;

pub const CONFIG_FILE: &str = "config.txt";
pub const METRICS_FILE: &str = "metrics.csv";
pub const CHECKPOINT_FILE: &str = "checkpoint.bin";
pub const META_FILE: &str = "run_meta.txt";

pub const METRICS_HEADER: [&str; 9] = [
    "step",
    "epoch",
    "split",
    "loss",
    "metric",
    "metric_kind",
    "fraction_of_baseline",
    "lr",
    "wall_ms",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MetricKind {
    Accuracy,
    PayloadAccuracy,
    Bpc,
    Nll,
    Mse,
}

impl MetricKind {
    pub fn name(self) -> &'static str {
        match self {
            MetricKind::Accuracy => "accuracy",
            MetricKind::PayloadAccuracy => "payload_accuracy",
            MetricKind::Bpc => "bpc",
            MetricKind::Nll => "nll",
            MetricKind::Mse => "mse",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            MetricKind::Accuracy,
            MetricKind::PayloadAccuracy,
            MetricKind::Bpc,
            MetricKind::Nll,
            MetricKind::Mse,
        ]
        .into_iter()
        .find(|k| k.name() == s)
    }

    fn of(loss_kind: LossKind, masked: bool) -> Self {
        match loss_kind {
            LossKind::MseLastStep => MetricKind::Mse,
            LossKind::CeLastStep => MetricKind::Accuracy,
            LossKind::CePerStep if masked => MetricKind::PayloadAccuracy,
            LossKind::CePerStep => MetricKind::Accuracy,
            LossKind::BernoulliPerStep => MetricKind::Nll,
            LossKind::CePerToken => MetricKind::Bpc,
        }
    }
}

/// One line of `metrics.csv`.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricsRow {
    pub step: u64,
    pub epoch: f64,
    pub split: String,
    pub loss: f64,
    pub metric: f64,
    pub metric_kind: MetricKind,
    pub fraction_of_baseline: Option<f64>,
    pub lr: f64,
    pub wall_ms: u64,
}

impl MetricsRow {
    pub fn to_record(&self) -> [String; 9] {
        [
            self.step.to_string(),
            format!("{:.4}", self.epoch),
            self.split.clone(),
            self.loss.to_string(),
            self.metric.to_string(),
            self.metric_kind.name().to_string(),
            self.fraction_of_baseline.map_or_else(String::new, |f| f.to_string()),
            self.lr.to_string(),
            self.wall_ms.to_string(),
        ]
    }

    pub fn from_record(rec: &csv::StringRecord) -> Result<Self> {
        let field = |i: usize| rec.get(i).ok_or_else(|| Error::Config(format!("metrics row has no column {i}")));
        let num = |i: usize| -> Result<f64> {
            let s = field(i)?;
            s.parse().map_err(|_| Error::Config(format!("bad number {s:?} in metrics column {i}")))
        };
        let kind = field(5)?;
        Ok(Self {
            step: num(0)? as u64,
            epoch: num(1)?,
            split: field(2)?.to_string(),
            loss: num(3)?,
            metric: num(4)?,
            metric_kind: MetricKind::parse(kind).ok_or_else(|| Error::Config(format!("unknown metric {kind:?}")))?,
            fraction_of_baseline: if field(6)?.is_empty() { None } else { Some(num(6)?) },
            lr: num(7)?,
            wall_ms: num(8)? as u64,
        })
    }
}

pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRow>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let header = rdr.headers()?.clone();
    if header.iter().ne(METRICS_HEADER.iter().copied()) {
        return Err(Error::format(path.display().to_string(), 0, "unexpected metrics header"));
    }
    rdr.records().map(|r| MetricsRow::from_record(&r?)).collect()
}

/// One split of a task's data.
#[derive(Clone, Debug)]
pub enum Split {
    /// A fixed set of equally shaped samples.
    Rows(TaskBatch<f32>),
    /// MNIST images, batched on demand.
    Mnist(MnistSet),
    /// Variable-length sequences, one batch each.
    Sequences(Vec<TaskBatch<f32>>),
    /// A token stream cut into windows.
    Stream(Vec<usize>),
}

impl Split {
    fn units(&self) -> usize {
        match self {
            Split::Rows(b) => b.batch_size(),
            Split::Mnist(m) => m.len(),
            Split::Sequences(s) => s.len(),
            Split::Stream(s) => s.len(),
        }
    }
}

/// Training data plus the splits evaluated during a run.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub train: Split,
    /// Evaluated at every evaluation event.
    pub eval: (String, Split),
    /// Evaluated once, after the last step.
    pub final_eval: Option<(String, Split)>,
    /// Vocabulary size for token tasks built from data.
    pub vocab: Option<usize>,
}

fn mnist_files(dir: &Path) -> [(PathBuf, PathBuf); 2] {
    [
        (dir.join("train-images-idx3-ubyte"), dir.join("train-labels-idx1-ubyte")),
        (dir.join("t10k-images-idx3-ubyte"), dir.join("t10k-labels-idx1-ubyte")),
    ]
}

/// True when the MNIST files for `cfg` are present.
pub fn mnist_available(dir: &Path) -> bool {
    mnist_files(dir).iter().all(|(i, l)| i.is_file() && l.is_file())
}

fn music_split(path: &str) -> Result<Split> {
    let seqs = tasks::load_pianoroll(Path::new(path))?;
    Ok(Split::Sequences(seqs.iter().filter_map(tasks::next_frame_batch).collect()))
}

/// Generates or loads the data a config trains on.
pub fn load_dataset(cfg: &ExperimentConfig) -> Result<Dataset> {
    let t = &cfg.task;
    let seed = |name: &str| stream_seed(cfg.seed, name, 0);
    Ok(match t.kind {
        TaskKind::Adding | TaskKind::Copy => {
            let gen = |n, s| match t.kind {
                TaskKind::Adding => tasks::gen_adding::<f32>(n, t.seq_len, s),
                _ => tasks::gen_copy_memory::<f32>(n, t.seq_len, s),
            };
            Dataset {
                train: Split::Rows(gen(t.train_samples, seed("data.train"))?),
                eval: ("test".into(), Split::Rows(gen(t.test_samples, seed("data.test"))?)),
                final_eval: None,
                vocab: None,
            }
        }
        TaskKind::SeqMnist | TaskKind::PermutedMnist => {
            let [(tri, trl), (tei, tel)] = mnist_files(Path::new(&t.path));
            let mut train = tasks::load_mnist_idx(&tri, &trl)?;
            let mut test = tasks::load_mnist_idx(&tei, &tel)?;
            if t.kind == TaskKind::PermutedMnist {
                train = train.permute(t.perm_seed);
                test = test.permute(t.perm_seed);
            }
            if t.eval_limit > 0 && t.eval_limit < test.len() {
                let keep = t.eval_limit;
                test.images.truncate(keep * test.pixels());
                test.labels.truncate(keep);
            }
            Dataset {
                train: Split::Mnist(train),
                eval: ("test".into(), Split::Mnist(test)),
                final_eval: None,
                vocab: None,
            }
        }
        TaskKind::Music => Dataset {
            train: music_split(&t.path)?,
            eval: ("valid".into(), music_split(&t.valid_path)?),
            final_eval: Some(("test".into(), music_split(&t.test_path)?)),
            vocab: None,
        },
        TaskKind::CharLm => {
            let corpus = if t.path == BUNDLED_CORPUS {
                tasks::char_corpus_from_bytes(tasks::bundled_corpus(), SplitFractions::default())?
            } else {
                tasks::load_char_corpus(Path::new(&t.path), SplitFractions::default())?
            };
            for (name, s) in [("train", &corpus.train), ("valid", &corpus.valid), ("test", &corpus.test)] {
                if s.len() < t.unroll + 1 {
                    return Err(Error::Config(format!(
                        "{name} split has {} tokens, fewer than one window of {}",
                        s.len(),
                        t.unroll + 1
                    )));
                }
            }
            let CharCorpus {
                vocab,
                train,
                valid,
                test,
            } = corpus;
            Dataset {
                train: Split::Stream(train),
                eval: ("valid".into(), Split::Stream(valid)),
                final_eval: Some(("test".into(), Split::Stream(test))),
                vocab: Some(vocab.size()),
            }
        }
    })
}

/// Sample order: a fresh shuffle of the training set for every epoch.
struct EpochOrder {
    seed: u64,
    n: usize,
    cached: Option<(u64, Vec<usize>)>,
}

impl EpochOrder {
    fn index(&mut self, k: u64) -> usize {
        let epoch = k / self.n as u64;
        if self.cached.as_ref().is_none_or(|(e, _)| *e != epoch) {
            let mut perm: Vec<usize> = (0..self.n).collect();
            perm.shuffle(&mut ChaCha8Rng::seed_from_u64(stream_seed(self.seed, "shuffle", epoch)));
            self.cached = Some((epoch, perm));
        }
        self.cached.as_ref().expect("just filled").1[(k % self.n as u64) as usize]
    }
}

fn train_batches(split: &Split, order: &mut EpochOrder, cfg: &ExperimentConfig, step: u64) -> Result<Vec<TaskBatch<f32>>> {
    let bs = cfg.train.batch_size;
    let first = step * bs as u64;
    let picks = |order: &mut EpochOrder| -> Vec<usize> { (0..bs as u64).map(|i| order.index(first + i)).collect() };
    Ok(match split {
        Split::Rows(b) => vec![b.rows(&picks(order))],
        Split::Mnist(m) => vec![m.batch(&picks(order))],
        Split::Sequences(s) => picks(order).into_iter().map(|i| s[i].clone()).collect(),
        Split::Stream(s) => {
            let len = cfg.task.unroll;
            let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(cfg.seed, "windows", step));
            let starts: Vec<usize> = (0..bs).map(|_| rng.random_range(0..s.len() - len)).collect();
            vec![CharCorpus::window_batch(s, &starts, len)?]
        }
    })
}

fn epoch_at(split: &Split, cfg: &ExperimentConfig, steps: u64) -> f64 {
    let per_step = match split {
        Split::Stream(_) => cfg.train.batch_size * cfg.task.unroll,
        _ => cfg.train.batch_size,
    };
    (steps as f64 * per_step as f64) / split.units().max(1) as f64
}

fn argmax(v: impl Iterator<Item = f32>) -> usize {
    let mut best = (0, f32::NEG_INFINITY);
    for (i, x) in v.enumerate() {
        if x > best.1 {
            best = (i, x);
        }
    }
    best.0
}

/// Correct predictions and scored positions for accuracy-type metrics.
fn hits(batch: &TaskBatch<f32>, logits: &[f32], shape: &[usize]) -> (usize, usize) {
    let Targets::Labels(labels) = &batch.targets else { return (0, 0) };
    match batch.loss_kind {
        LossKind::CeLastStep => {
            let c = shape[1];
            let correct = labels
                .iter()
                .enumerate()
                .filter(|&(b, &y)| argmax(logits[b * c..(b + 1) * c].iter().copied()) == y)
                .count();
            (correct, labels.len())
        }
        LossKind::CePerStep => {
            let (c, t_len) = (shape[1], shape[2]);
            let (mut hit, mut total) = (0, 0);
            for (i, &y) in labels.iter().enumerate() {
                if batch.mask.as_ref().is_some_and(|m| m[i] <= 0.0) {
                    continue;
                }
                let (b, t) = (i / t_len, i % t_len);
                let base = b * c * t_len + t;
                total += 1;
                hit += (argmax((0..c).map(|k| logits[base + k * t_len])) == y) as usize;
            }
            (hit, total)
        }
        _ => (0, 0),
    }
}

/// Running loss and metric over a sequence of batches.
#[derive(Clone, Debug, Default)]
struct Accumulator {
    loss_sum: f64,
    weight: f64,
    hit: usize,
    scored: usize,
    kind: Option<MetricKind>,
}

impl Accumulator {
    fn add(&mut self, batch: &TaskBatch<f32>, loss: f64, logits: &[f32], shape: &[usize]) {
        let w = batch.batch_size() as f64;
        self.loss_sum += loss * w;
        self.weight += w;
        let (h, s) = hits(batch, logits, shape);
        self.hit += h;
        self.scored += s;
        self.kind = Some(MetricKind::of(batch.loss_kind, batch.mask.is_some()));
    }

    fn finish(&self) -> Option<Evaluation> {
        let kind = self.kind?;
        let loss = self.loss_sum / self.weight;
        let metric = match kind {
            MetricKind::Accuracy | MetricKind::PayloadAccuracy => self.hit as f64 / self.scored.max(1) as f64,
            MetricKind::Bpc => loss / std::f64::consts::LN_2,
            MetricKind::Nll | MetricKind::Mse => loss,
        };
        Some(Evaluation { loss, metric, kind })
    }
}

/// Loss and task metric of a model over some data.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Evaluation {
    pub loss: f64,
    pub metric: f64,
    pub kind: MetricKind,
}

/// Evaluates with dropout disabled. Parameters are only read.
pub fn evaluate(
    model: &SequenceModel<f32>,
    batches: impl IntoIterator<Item = TaskBatch<f32>>,
) -> Result<Evaluation> {
    let mut acc = Accumulator::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for batch in batches {
        let mut tape = Tape::new();
        let bound = model.params().bind(&mut tape);
        let logits = model.forward(&mut tape, &bound, batch.model_input(), false, &mut rng)?;
        let loss = batch.loss(&mut tape, logits)?;
        acc.add(&batch, tape.value(loss).item() as f64, tape.data(logits), tape.shape(logits));
    }
    acc.finish().ok_or_else(|| Error::Config("nothing to evaluate".into()))
}

/// Loss and metric of fixed logits against one batch.
pub fn score(batch: &TaskBatch<f32>, logits: &Tensor<f32>) -> Result<Evaluation> {
    let mut tape = Tape::new();
    let v = tape.constant(logits.clone());
    let loss = batch.loss(&mut tape, v)?;
    let mut acc = Accumulator::default();
    acc.add(batch, tape.value(loss).item() as f64, logits.data(), logits.shape());
    acc.finish().ok_or_else(|| Error::Config("nothing to evaluate".into()))
}

/// Batches covering an evaluation split.
pub fn eval_batches(split: &Split, cfg: &ExperimentConfig) -> Result<Vec<TaskBatch<f32>>> {
    let eb = cfg.train.eval_batch;
    Ok(match split {
        Split::Rows(b) => {
            let n = b.batch_size();
            (0..n).step_by(eb).map(|s| b.rows(&(s..(s + eb).min(n)).collect::<Vec<_>>())).collect()
        }
        Split::Mnist(m) => {
            let n = m.len();
            (0..n).step_by(eb).map(|s| m.batch(&(s..(s + eb).min(n)).collect::<Vec<_>>())).collect()
        }
        Split::Sequences(s) => {
            let limit = if cfg.task.eval_limit == 0 { s.len() } else { cfg.task.eval_limit };
            s.iter().take(limit).cloned().collect()
        }
        Split::Stream(s) => {
            let limit = if cfg.task.eval_limit == 0 { usize::MAX } else { cfg.task.eval_limit };
            let starts = CharCorpus::eval_starts(s, cfg.task.unroll, limit);
            starts
                .chunks(eb)
                .map(|c| CharCorpus::window_batch(s, c, cfg.task.unroll))
                .collect::<Result<_>>()?
        }
    })
}

/// Result of a completed run.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub out_dir: PathBuf,
    pub config_hash: String,
    pub param_count: usize,
    pub steps: u64,
    /// Last evaluation row (the final test row when one exists).
    pub final_row: MetricsRow,
}

struct MetricsSink {
    writer: csv::Writer<File>,
}

impl MetricsSink {
    fn create(path: &Path, keep: &[MetricsRow]) -> Result<Self> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut writer = csv::Writer::from_writer(file);
        writer.write_record(METRICS_HEADER)?;
        for r in keep {
            writer.write_record(r.to_record())?;
        }
        writer.flush().map_err(|e| Error::io(path, e))?;
        Ok(Self { writer })
    }

    fn write(&mut self, rows: &[MetricsRow]) -> Result<()> {
        for r in rows {
            self.writer.write_record(r.to_record())?;
        }
        self.writer.flush().map_err(|e| Error::io(METRICS_FILE, e))
    }
}

/// Model for a config, initialised from the config's seed.
pub fn build_model(cfg: &ExperimentConfig, vocab: Option<usize>) -> Result<SequenceModel<f32>> {
    let spec = cfg.model_spec(vocab)?;
    let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(cfg.seed, "init", 0));
    SequenceModel::build(&spec, &mut rng)
}

pub fn write_resolved_config(cfg: &ExperimentConfig, dir: &Path) -> Result<()> {
    let path = dir.join(CONFIG_FILE);
    let text = format!("# config_hash {}\n{}", cfg.hash(), cfg.to_text());
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

/// Trains from scratch into `out_dir`, replacing earlier results there.
pub fn train(cfg: &ExperimentConfig, out_dir: &Path) -> Result<RunOutcome> {
    run(cfg, out_dir, false)
}

/// Continues the run in `out_dir` from its checkpoint up to
/// `cfg.train.steps`. The config must hash like the one that wrote the
/// checkpoint.
pub fn resume(cfg: &ExperimentConfig, out_dir: &Path) -> Result<RunOutcome> {
    run(cfg, out_dir, true)
}

struct RunState {
    model: SequenceModel<f32>,
    optimizer: Optimizer<f32>,
    scheduler: PlateauScheduler,
    step: u64,
}

/// Loads the checkpoint into `state` and returns the metrics rows to keep.
/// Rows written only because the earlier run ended (its final-split
/// evaluation) are dropped so the continued file matches an uninterrupted
/// run.
fn restore_state(
    cfg: &ExperimentConfig,
    state: &mut RunState,
    out_dir: &Path,
    final_split: Option<&str>,
) -> Result<Vec<MetricsRow>> {
    let ck = Checkpoint::<f32>::load(&out_dir.join(CHECKPOINT_FILE))?;
    if ck.step >= cfg.train.steps {
        return Err(Error::Config(format!(
            "run already has {} steps; raise train.steps to continue it",
            ck.step
        )));
    }
    ck.restore_params(&cfg.hash(), state.model.params_mut())?;
    state
        .optimizer
        .restore(ck.optimizer_step, ck.optimizer.iter().map(|(_, d)| d.clone()).collect())?;
    state.optimizer.set_lr(ck.lr);
    state.scheduler.restore(ck.plateau_best, ck.plateau_bad);
    state.step = ck.step;
    let rows = read_metrics(&out_dir.join(METRICS_FILE))?;
    Ok(rows
        .into_iter()
        .filter(|r| r.step < ck.step || (r.step == ck.step && Some(r.split.as_str()) != final_split))
        .collect())
}

fn checkpoint_of(cfg: &ExperimentConfig, state: &RunState) -> Checkpoint<f32> {
    let (best, bad) = state.scheduler.state();
    Checkpoint {
        config_hash: cfg.hash(),
        step: state.step,
        lr: state.optimizer.lr(),
        plateau_best: best,
        plateau_bad: bad,
        optimizer_step: state.optimizer.steps(),
        params: state
            .model
            .params()
            .iter()
            .map(|(n, t)| (n.to_string(), t.shape().to_vec(), t.data().to_vec()))
            .collect(),
        optimizer: state
            .optimizer
            .state_buffers()
            .into_iter()
            .map(|(n, d)| (n, d.to_vec()))
            .collect(),
    }
}

fn write_meta(cfg: &ExperimentConfig, dir: &Path, state: &RunState, status: &str, last: &[MetricsRow]) -> Result<()> {
    let mut s = String::new();
    let spec = state.model.spec();
    let _ = writeln!(s, "name {}", cfg.name);
    let _ = writeln!(s, "config_hash {}", cfg.hash());
    let _ = writeln!(s, "status {status}");
    let _ = writeln!(s, "task {}", cfg.task.kind.name());
    let _ = writeln!(s, "model {}", cfg.model.kind.name());
    let _ = writeln!(s, "param_count {}", state.model.param_count());
    let _ = writeln!(s, "precision f32");
    let _ = writeln!(s, "input_encoding {:?}", spec.input);
    if let crate::nn::BodySpec::Tcn(t) = &spec.body {
        let _ = writeln!(s, "receptive_field {}", t.receptive_field());
    }
    if matches!(cfg.task.kind, TaskKind::SeqMnist | TaskKind::PermutedMnist) {
        let _ = writeln!(s, "pixel_scaling divide by 255, no centering");
    }
    if let Some(b) = baseline_loss(cfg.task.kind, cfg.task.seq_len) {
        let _ = writeln!(s, "baseline_loss {b}");
    }
    let _ = writeln!(s, "steps_completed {}", state.step);
    for r in last {
        let _ = writeln!(s, "final_{}_loss {}", r.split, r.loss);
        let _ = writeln!(s, "final_{}_{} {}", r.split, r.metric_kind.name(), r.metric);
    }
    let path = dir.join(META_FILE);
    std::fs::write(&path, s).map_err(|e| Error::io(&path, e))
}

fn run(cfg: &ExperimentConfig, out_dir: &Path, resuming: bool) -> Result<RunOutcome> {
    cfg.validate()?;
    let data = load_dataset(cfg)?;
    let model = build_model(cfg, data.vocab)?;
    let optimizer = Optimizer::new(cfg.optimizer_config(), model.params());
    let mut state = RunState {
        model,
        optimizer,
        scheduler: PlateauScheduler::new(cfg.optim.plateau_factor, cfg.optim.plateau_patience),
        step: 0,
    };
    let started = Instant::now();
    let wall = |cfg: &ExperimentConfig| {
        if cfg.train.record_wall_time {
            started.elapsed().as_millis() as u64
        } else {
            0
        }
    };
    let baseline = baseline_loss(cfg.task.kind, cfg.task.seq_len);
    let row = |split: &str, step: u64, e: Evaluation, lr: f64, wall_ms: u64| MetricsRow {
        step,
        epoch: epoch_at(&data.train, cfg, step),
        split: split.to_string(),
        loss: e.loss,
        metric: e.metric,
        metric_kind: e.kind,
        fraction_of_baseline: baseline.map(|b| e.loss / b),
        lr,
        wall_ms,
    };

    let eval_set = eval_batches(&data.eval.1, cfg)?;
    let mut last_rows: Vec<MetricsRow>;
    let mut sink = if resuming {
        let final_split = data.final_eval.as_ref().map(|(name, _)| name.as_str());
        let kept = restore_state(cfg, &mut state, out_dir, final_split)?;
        write_resolved_config(cfg, out_dir)?;
        last_rows = kept.iter().rev().take(1).cloned().collect();
        MetricsSink::create(&out_dir.join(METRICS_FILE), &kept)?
    } else {
        std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
        write_resolved_config(cfg, out_dir)?;
        let mut sink = MetricsSink::create(&out_dir.join(METRICS_FILE), &[])?;
        let e = evaluate(&state.model, eval_set.iter().cloned())?;
        last_rows = vec![row(&data.eval.0, 0, e, state.optimizer.lr(), wall(cfg))];
        sink.write(&last_rows)?;
        sink
    };

    let mut order = EpochOrder {
        seed: cfg.seed,
        n: data.train.units(),
        cached: None,
    };
    let mut running = Accumulator::default();
    let total = cfg.train.steps;
    while state.step < total {
        let step = state.step;
        let batches = train_batches(&data.train, &mut order, cfg, step)?;
        let mut tape = Tape::new();
        let bound = state.model.params().bind(&mut tape);
        let mut drop_rng = ChaCha8Rng::seed_from_u64(stream_seed(cfg.seed, "dropout", step));
        let mut losses = Vec::with_capacity(batches.len());
        for b in &batches {
            let logits = state.model.forward(&mut tape, &bound, b.model_input(), true, &mut drop_rng)?;
            let loss = b.loss(&mut tape, logits)?;
            running.add(b, tape.value(loss).item() as f64, tape.data(logits), tape.shape(logits));
            losses.push(loss);
        }
        let mut loss = losses[0];
        for &l in &losses[1..] {
            loss = tape.add(loss, l)?;
        }
        if losses.len() > 1 {
            loss = tape.scale(loss, 1.0 / losses.len() as f32);
        }
        let value = tape.value(loss).item();
        let update = if value.is_finite() {
            tape.backward(loss).and_then(|_| {
                state.model.params_mut().zero_grads();
                state.model.params_mut().accumulate_grads(&tape, &bound)?;
                if let Some(c) = cfg.optim.grad_clip {
                    state.model.params_mut().clip_grad_norm(c);
                }
                state.optimizer.step(state.model.params_mut())
            })
        } else {
            Err(Error::NonFinite(format!("training loss {value} at step {}", step + 1)))
        };
        if let Err(e) = update {
            let status = format!("aborted at step {}: {e}", step + 1);
            write_meta(cfg, out_dir, &state, &status, &last_rows)?;
            return Err(e);
        }
        state.model.params_mut().zero_grads();
        state.step += 1;

        let s = state.step;
        if s.is_multiple_of(cfg.train.eval_every) || s == total {
            let lr = state.optimizer.lr();
            let w = wall(cfg);
            let mut rows = Vec::new();
            if let Some(e) = running.finish() {
                rows.push(row("train", s, e, lr, w));
            }
            running = Accumulator::default();
            let e = evaluate(&state.model, eval_set.iter().cloned())?;
            rows.push(row(&data.eval.0, s, e, lr, w));
            if s == total {
                if let Some((name, split)) = &data.final_eval {
                    let e = evaluate(&state.model, eval_batches(split, cfg)?)?;
                    rows.push(row(name, s, e, lr, w));
                }
            }
            if let Some(new_lr) = state.scheduler.observe(e.loss, lr) {
                state.optimizer.set_lr(new_lr);
            }
            sink.write(&rows)?;
            last_rows = rows.into_iter().filter(|r| r.split != "train").collect();
        }
    }

    checkpoint_of(cfg, &state).save(&out_dir.join(CHECKPOINT_FILE))?;
    write_meta(cfg, out_dir, &state, "completed", &last_rows)?;
    let final_row = last_rows
        .last()
        .cloned()
        .ok_or_else(|| Error::Contract("run produced no evaluation".into()))?;
    Ok(RunOutcome {
        out_dir: out_dir.to_path_buf(),
        config_hash: cfg.hash(),
        param_count: state.model.param_count(),
        steps: state.step,
        final_row,
    })
}
