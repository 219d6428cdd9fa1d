//! Character-level language modelling over raw bytes.

use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::{BatchInputs, LossKind, TaskBatch, Targets};

/// Byte vocabulary built from the training split; unseen bytes map to a
/// trailing UNK id.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocab {
    ids: Vec<Option<usize>>,
    symbols: Vec<u8>,
}

impl Vocab {
    pub fn from_bytes(train: &[u8]) -> Self {
        let mut seen = [false; 256];
        for &b in train {
            seen[b as usize] = true;
        }
        let symbols: Vec<u8> = (0..=255u8).filter(|&b| seen[b as usize]).collect();
        let mut ids = vec![None; 256];
        for (i, &s) in symbols.iter().enumerate() {
            ids[s as usize] = Some(i);
        }
        Self { ids, symbols }
    }

    /// Output classes, including UNK.
    pub fn size(&self) -> usize {
        self.symbols.len() + 1
    }

    pub fn unk(&self) -> usize {
        self.symbols.len()
    }

    pub fn symbols(&self) -> &[u8] {
        &self.symbols
    }

    pub fn encode(&self, bytes: &[u8]) -> Vec<usize> {
        bytes.iter().map(|&b| self.ids[b as usize].unwrap_or(self.unk())).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SplitFractions {
    pub train: f64,
    pub valid: f64,
    pub test: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        Self {
            train: 0.9,
            valid: 0.05,
            test: 0.05,
        }
    }
}

/// A corpus cut into contiguous, disjoint train/valid/test token streams.
#[derive(Clone, Debug)]
pub struct CharCorpus {
    pub vocab: Vocab,
    pub train: Vec<usize>,
    pub valid: Vec<usize>,
    pub test: Vec<usize>,
}

pub fn char_corpus_from_bytes(bytes: &[u8], fractions: SplitFractions) -> Result<CharCorpus> {
    if bytes.is_empty() {
        return Err(Error::domain("empty corpus"));
    }
    let SplitFractions { train, valid, test } = fractions;
    if [train, valid, test].iter().any(|f| !(0.0..=1.0).contains(f)) || train <= 0.0 || train + valid + test > 1.0 + 1e-9 {
        return Err(Error::domain(format!("invalid split fractions {fractions:?}")));
    }
    let n = bytes.len();
    let a = ((n as f64 * train).round() as usize).clamp(1, n);
    let b = (a + (n as f64 * valid).round() as usize).min(n);
    let c = (b + (n as f64 * test).round() as usize).min(n);
    let vocab = Vocab::from_bytes(&bytes[..a]);
    Ok(CharCorpus {
        train: vocab.encode(&bytes[..a]),
        valid: vocab.encode(&bytes[a..b]),
        test: vocab.encode(&bytes[b..c]),
        vocab,
    })
}

/// The text corpus compiled into the library (about 450 KB of English
/// prose and code documentation).
pub fn bundled_corpus() -> &'static [u8] {
    include_bytes!("../../data/pydoc_topics.txt")
}

pub fn load_char_corpus(path: &Path, fractions: SplitFractions) -> Result<CharCorpus> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    char_corpus_from_bytes(&bytes, fractions)
}

impl CharCorpus {
    /// Next-token batch from windows of `stream` starting at `starts`:
    /// inputs `stream[s..s+len]`, targets `stream[s+1..s+len+1]`.
    pub fn window_batch<S: Scalar>(stream: &[usize], starts: &[usize], len: usize) -> Result<TaskBatch<S>> {
        let mut tokens = Vec::with_capacity(starts.len() * len);
        let mut labels = Vec::with_capacity(starts.len() * len);
        for &s in starts {
            if s + len + 1 > stream.len() {
                return Err(Error::domain(format!(
                    "window {s}..{} runs past the stream of {}",
                    s + len + 1,
                    stream.len()
                )));
            }
            tokens.extend_from_slice(&stream[s..s + len]);
            labels.extend_from_slice(&stream[s + 1..s + len + 1]);
        }
        Ok(TaskBatch {
            inputs: BatchInputs::Tokens {
                tokens,
                batch: starts.len(),
                len,
            },
            targets: Targets::Labels(labels),
            loss_kind: LossKind::CePerToken,
            mask: None,
        })
    }

    /// Non-overlapping window starts covering `stream` (at most `max_windows`).
    pub fn eval_starts(stream: &[usize], len: usize, max_windows: usize) -> Vec<usize> {
        if stream.len() < len + 1 {
            return Vec::new();
        }
        (0..=(stream.len() - len - 1)).step_by(len).take(max_windows).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vocabulary_of_aab() {
        let v = Vocab::from_bytes(b"aab");
        assert_eq!(v.size(), 3);
        assert_eq!(v.encode(b"abz"), vec![0, 1, 2]);
    }

    #[test]
    fn splits_are_contiguous_and_disjoint() {
        let text: Vec<u8> = (0..1000u32).map(|i| b'a' + (i % 26) as u8).collect();
        let c = char_corpus_from_bytes(&text, SplitFractions::default()).unwrap();
        assert_eq!(c.train.len() + c.valid.len() + c.test.len(), 1000);
        assert_eq!(c.train.len(), 900);
        let all: Vec<usize> = c.train.iter().chain(&c.valid).chain(&c.test).copied().collect();
        assert_eq!(all, c.vocab.encode(&text));
    }

    #[test]
    fn unseen_eval_bytes_are_unk() {
        let c = char_corpus_from_bytes(b"aaaaaaaaab", SplitFractions { train: 0.9, valid: 0.1, test: 0.0 }).unwrap();
        assert_eq!(c.vocab.size(), 2);
        assert_eq!(c.valid, vec![c.vocab.unk()]);
    }

    #[test]
    fn empty_corpus_is_rejected() {
        assert!(matches!(char_corpus_from_bytes(b"", SplitFractions::default()), Err(Error::Domain(_))));
    }

    #[test]
    fn windows_shift_targets_by_one() {
        let stream: Vec<usize> = (0..20).collect();
        let b = CharCorpus::window_batch::<f32>(&stream, &[0, 7], 5).unwrap();
        let BatchInputs::Tokens { tokens, .. } = &b.inputs else { panic!() };
        let Targets::Labels(y) = &b.targets else { panic!() };
        assert_eq!(&tokens[5..], &[7, 8, 9, 10, 11]);
        assert_eq!(&y[5..], &[8, 9, 10, 11, 12]);
        assert!(CharCorpus::window_batch::<f32>(&stream, &[15], 5).is_err());
        assert_eq!(CharCorpus::eval_starts(&stream, 5, 10), vec![0, 5, 10]);
    }
}
