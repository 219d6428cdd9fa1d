//! Polyphonic piano rolls in a plain text format.
//!
//! One frame per line, listing the active key indices (0–87, i.e. MIDI
//! notes 21–108) separated by spaces. A line holding a single `-` is a
//! frame with no keys down. Blank lines separate sequences and lines
//! starting with `#` are comments.

use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

use super::{BatchInputs, LossKind, TaskBatch, Targets};

pub const NUM_KEYS: usize = 88;
/// MIDI note number of key 0.
pub const LOWEST_MIDI_NOTE: u8 = 21;

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct PianoRollSequence {
    pub frames: Vec<[bool; NUM_KEYS]>,
}

impl PianoRollSequence {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

pub fn parse_pianoroll(text: &str, source: &str) -> Result<Vec<PianoRollSequence>> {
    let mut seqs = Vec::new();
    let mut current = PianoRollSequence::default();
    let mut offset = 0usize;
    for line in text.split_inclusive('\n') {
        let line_start = offset;
        offset += line.len();
        let body = line.trim_end_matches(['\n', '\r']);
        let trimmed = body.trim();
        if trimmed.starts_with('#') {
            continue;
        }
        if trimmed.is_empty() {
            if !current.is_empty() {
                seqs.push(std::mem::take(&mut current));
            }
            continue;
        }
        let mut frame = [false; NUM_KEYS];
        if trimmed != "-" {
            let mut col = 0usize;
            for tok in body.split(' ') {
                let tok_offset = line_start + col;
                col += tok.len() + 1;
                let tok = tok.trim();
                if tok.is_empty() {
                    continue;
                }
                let key: usize = tok
                    .parse()
                    .map_err(|_| Error::format(source, tok_offset as u64, format!("not a key index: {tok:?}")))?;
                if key >= NUM_KEYS {
                    return Err(Error::format(
                        source,
                        tok_offset as u64,
                        format!("key {key} outside 0..{NUM_KEYS}"),
                    ));
                }
                frame[key] = true;
            }
        }
        current.frames.push(frame);
    }
    if !current.is_empty() {
        seqs.push(current);
    }
    Ok(seqs)
}

pub fn load_pianoroll(path: &Path) -> Result<Vec<PianoRollSequence>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_pianoroll(&text, &path.display().to_string())
}

pub fn write_pianoroll(seqs: &[PianoRollSequence]) -> String {
    let mut out = String::new();
    for (i, seq) in seqs.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        for frame in &seq.frames {
            let keys: Vec<String> = (0..NUM_KEYS).filter(|&k| frame[k]).map(|k| k.to_string()).collect();
            if keys.is_empty() {
                out.push('-');
            } else {
                out.push_str(&keys.join(" "));
            }
            out.push('\n');
        }
    }
    out
}

/// Next-frame prediction over one sequence: inputs are frames `0..L−1`,
/// targets frames `1..L`, both `[1, 88, L−1]`. `None` when the sequence
/// has fewer than two frames.
pub fn next_frame_batch<S: Scalar>(seq: &PianoRollSequence) -> Option<TaskBatch<S>> {
    let steps = seq.len().checked_sub(1).filter(|&s| s > 0)?;
    let mut x = vec![S::zero(); NUM_KEYS * steps];
    let mut y = vec![S::zero(); NUM_KEYS * steps];
    for t in 0..steps {
        for k in 0..NUM_KEYS {
            if seq.frames[t][k] {
                x[k * steps + t] = S::one();
            }
            if seq.frames[t + 1][k] {
                y[k * steps + t] = S::one();
            }
        }
    }
    Some(TaskBatch {
        inputs: BatchInputs::Dense(Tensor::from_vec(x, [1, NUM_KEYS, steps]).expect("frame layout")),
        targets: Targets::Values(y),
        loss_kind: LossKind::BernoulliPerStep,
        mask: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "# two tiny chorales\n39 43 46\n39 43 46\n-\n41 45\n\n\n# second\n0 87\n12\n";

    #[test]
    fn parses_blocks_and_comments() {
        let seqs = parse_pianoroll(SAMPLE, "sample").unwrap();
        assert_eq!(seqs.len(), 2);
        assert_eq!(seqs[0].len(), 4);
        assert!(seqs[0].frames[2].iter().all(|&k| !k));
        assert!(seqs[1].frames[0][0] && seqs[1].frames[0][87]);
    }

    #[test]
    fn round_trip() {
        let seqs = parse_pianoroll(SAMPLE, "sample").unwrap();
        let text = write_pianoroll(&seqs);
        assert_eq!(parse_pianoroll(&text, "again").unwrap(), seqs);
    }

    #[test]
    fn key_out_of_range_reports_offset() {
        let text = "1 2\n3 88\n";
        match parse_pianoroll(text, "bad") {
            Err(Error::Format { offset, message, .. }) => {
                assert_eq!(offset, 6);
                assert!(message.contains("88"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn single_frame_yields_no_batch() {
        let seq = PianoRollSequence {
            frames: vec![[false; NUM_KEYS]],
        };
        assert!(next_frame_batch::<f32>(&seq).is_none());
    }

    #[test]
    fn next_frame_alignment() {
        let seqs = parse_pianoroll(SAMPLE, "sample").unwrap();
        let b = next_frame_batch::<f32>(&seqs[0]).unwrap();
        let BatchInputs::Dense(x) = &b.inputs else { panic!() };
        let Targets::Values(y) = &b.targets else { panic!() };
        assert_eq!(x.shape(), &[1, 88, 3]);
        // target at step t is the input at step t + 1
        for k in 0..88 {
            for t in 0..2 {
                assert_eq!(y[k * 3 + t], x.data()[k * 3 + t + 1]);
            }
        }
        assert_eq!(y[41 * 3 + 2], 1.0);
    }
}
