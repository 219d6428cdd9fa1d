//! Benchmark tasks: synthetic generators, dataset loaders and the analytic
//! memoryless baselines used to normalise reported losses.

mod adding;
mod charlm;
mod copy;
pub mod mnist;
pub mod pianoroll;

pub use adding::gen_adding;
pub use charlm::{bundled_corpus, char_corpus_from_bytes, load_char_corpus, CharCorpus, SplitFractions, Vocab};
pub use copy::{gen_copy_memory, COPY_ALPHABET, COPY_DELIMITER, COPY_PAYLOAD};
pub use mnist::{load_mnist_idx, MnistSet, Permutation};
pub use pianoroll::{load_pianoroll, next_frame_batch, parse_pianoroll, write_pianoroll, PianoRollSequence, NUM_KEYS};

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::nn::ModelInput;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TaskKind {
    Adding,
    Copy,
    SeqMnist,
    PermutedMnist,
    Music,
    CharLm,
}

impl TaskKind {
    pub fn name(self) -> &'static str {
        match self {
            TaskKind::Adding => "adding",
            TaskKind::Copy => "copy",
            TaskKind::SeqMnist => "seqmnist",
            TaskKind::PermutedMnist => "pmnist",
            TaskKind::Music => "music",
            TaskKind::CharLm => "charlm",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            TaskKind::Adding,
            TaskKind::Copy,
            TaskKind::SeqMnist,
            TaskKind::PermutedMnist,
            TaskKind::Music,
            TaskKind::CharLm,
        ]
        .into_iter()
        .find(|k| k.name() == s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LossKind {
    /// Squared error of the final-step prediction.
    MseLastStep,
    /// Classification from the final step.
    CeLastStep,
    /// Classification at every step.
    CePerStep,
    /// Independent Bernoulli per key at every step.
    BernoulliPerStep,
    /// Next-token prediction at every step.
    CePerToken,
}

#[derive(Clone, Debug, PartialEq)]
pub enum BatchInputs<S> {
    /// `[batch, channels, T]`
    Dense(Tensor<S>),
    /// Row-major `[batch, len]` class indices.
    Tokens { tokens: Vec<usize>, batch: usize, len: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub enum Targets<S> {
    /// Real targets laid out like the model output.
    Values(Vec<S>),
    /// Class labels, indexed `b * T + t` for per-step tasks.
    Labels(Vec<usize>),
}

/// A batch of input sequences with their targets.
#[derive(Clone, Debug, PartialEq)]
pub struct TaskBatch<S> {
    pub inputs: BatchInputs<S>,
    pub targets: Targets<S>,
    pub loss_kind: LossKind,
    /// Per-position weights selecting the positions scored by the task
    /// metric (the copy-memory payload). The loss always averages over
    /// every position.
    pub mask: Option<Vec<S>>,
}

impl<S: Scalar> TaskBatch<S> {
    pub fn batch_size(&self) -> usize {
        match &self.inputs {
            BatchInputs::Dense(t) => t.shape()[0],
            BatchInputs::Tokens { batch, .. } => *batch,
        }
    }

    pub fn seq_len(&self) -> usize {
        match &self.inputs {
            BatchInputs::Dense(t) => t.shape()[2],
            BatchInputs::Tokens { len, .. } => *len,
        }
    }

    pub fn model_input(&self) -> ModelInput<'_, S> {
        match &self.inputs {
            BatchInputs::Dense(t) => ModelInput::Dense(t),
            BatchInputs::Tokens { tokens, batch, .. } => ModelInput::Tokens { tokens, batch: *batch },
        }
    }

    /// Records this batch's loss for `logits` on the tape.
    pub fn loss(&self, tape: &mut Tape<S>, logits: Var) -> Result<Var> {
        match (self.loss_kind, &self.targets) {
            (LossKind::MseLastStep, Targets::Values(y)) => tape.mse(logits, y),
            (LossKind::BernoulliPerStep, Targets::Values(y)) => tape.bernoulli_nll(logits, y),
            (LossKind::CeLastStep | LossKind::CePerStep | LossKind::CePerToken, Targets::Labels(y)) => {
                tape.cross_entropy(logits, y, None)
            }
            (kind, _) => Err(Error::Contract(format!("{kind:?} loss with mismatched target type"))),
        }
    }

    /// Sub-batch made of the given rows, in order.
    pub fn rows(&self, idx: &[usize]) -> TaskBatch<S> {
        let n = self.batch_size();
        let per_row = |total: usize| total / n.max(1);
        let pick = |v: &[S], width: usize| -> Vec<S> {
            idx.iter().flat_map(|&r| v[r * width..(r + 1) * width].iter().copied()).collect()
        };
        let inputs = match &self.inputs {
            BatchInputs::Dense(t) => {
                let w = per_row(t.len());
                let mut shape = t.shape().to_vec();
                shape[0] = idx.len();
                BatchInputs::Dense(Tensor::from_vec(pick(t.data(), w), shape).expect("row slice"))
            }
            BatchInputs::Tokens { tokens, len, .. } => BatchInputs::Tokens {
                tokens: idx.iter().flat_map(|&r| tokens[r * len..(r + 1) * len].iter().copied()).collect(),
                batch: idx.len(),
                len: *len,
            },
        };
        let targets = match &self.targets {
            Targets::Values(v) => Targets::Values(pick(v, per_row(v.len()))),
            Targets::Labels(l) => {
                let w = per_row(l.len());
                Targets::Labels(idx.iter().flat_map(|&r| l[r * w..(r + 1) * w].iter().copied()).collect())
            }
        };
        let mask = self.mask.as_ref().map(|m| pick(m, per_row(m.len())));
        TaskBatch {
            inputs,
            targets,
            loss_kind: self.loss_kind,
            mask,
        }
    }
}

/// Loss of the best predictor that ignores the informative inputs.
///
/// * adding: always predicting 1 gives `Var(U + U) = 1/6`.
/// * copy: predicting blank everywhere and a uniform guess over the eight
///   payload digits costs `ln 8` on each of the 10 payload positions,
///   averaged over all `T + 20` positions.
pub fn baseline_loss(task: TaskKind, seq_len: usize) -> Option<f64> {
    match task {
        TaskKind::Adding => Some(1.0 / 6.0),
        TaskKind::Copy => Some(COPY_PAYLOAD as f64 * 8f64.ln() / (seq_len + 20) as f64),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn copy_baselines() {
        let b1000 = baseline_loss(TaskKind::Copy, 1000).unwrap();
        assert!((b1000 - 0.02039).abs() < 5e-6, "{b1000}");
        let b500 = baseline_loss(TaskKind::Copy, 500).unwrap();
        assert!((b500 - 0.03999).abs() < 5e-6, "{b500}");
        assert!((baseline_loss(TaskKind::Adding, 200).unwrap() - 0.1667).abs() < 1e-4);
        assert!(baseline_loss(TaskKind::Music, 10).is_none());
    }

    #[test]
    fn task_names_round_trip() {
        for name in ["adding", "copy", "seqmnist", "pmnist", "music", "charlm"] {
            assert_eq!(TaskKind::parse(name).unwrap().name(), name);
        }
        assert!(TaskKind::parse("ptb").is_none());
    }
}
