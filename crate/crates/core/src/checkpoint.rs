//! Checkpoint container: a text header followed by raw little-endian
//! buffers.
//!
//! ```text
//! tcnlab checkpoint v1
//! config_hash 3f0c...
//! dtype f32
//! step 400
//! lr 0.002
//! plateau_best none
//! plateau_bad 0
//! optimizer_step 400
//! param block0.conv1.v 27x2x6
//! ...
//! state first.0 324
//! ...
//! end
//! <parameter buffers, then optimizer buffers, in header order>
//! ```

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::nn::ModelParams;
use crate::scalar::Scalar;

const MAGIC: &str = "tcnlab checkpoint v1";

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint<S> {
    pub config_hash: String,
    /// Training steps completed.
    pub step: u64,
    pub lr: f64,
    pub plateau_best: Option<f64>,
    pub plateau_bad: usize,
    pub optimizer_step: u64,
    pub params: Vec<(String, Vec<usize>, Vec<S>)>,
    pub optimizer: Vec<(String, Vec<S>)>,
}

fn fmt_shape(shape: &[usize]) -> String {
    shape.iter().map(usize::to_string).collect::<Vec<_>>().join("x")
}

impl<S: Scalar> Checkpoint<S> {
    pub fn param_count(&self) -> usize {
        self.params.iter().map(|(_, _, d)| d.len()).sum()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut head = String::new();
        let _ = writeln!(head, "{MAGIC}");
        let _ = writeln!(head, "config_hash {}", self.config_hash);
        let _ = writeln!(head, "dtype {}", S::DTYPE);
        let _ = writeln!(head, "step {}", self.step);
        let _ = writeln!(head, "lr {}", self.lr);
        let best = self.plateau_best.map_or_else(|| "none".to_string(), |b| b.to_string());
        let _ = writeln!(head, "plateau_best {best}");
        let _ = writeln!(head, "plateau_bad {}", self.plateau_bad);
        let _ = writeln!(head, "optimizer_step {}", self.optimizer_step);
        for (name, shape, _) in &self.params {
            let _ = writeln!(head, "param {name} {}", fmt_shape(shape));
        }
        for (name, data) in &self.optimizer {
            let _ = writeln!(head, "state {name} {}", data.len());
        }
        head.push_str("end\n");
        let mut out = head.into_bytes();
        for v in self.params.iter().flat_map(|(_, _, d)| d).chain(self.optimizer.iter().flat_map(|(_, d)| d)) {
            v.write_le(&mut out);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], source: &str) -> Result<Self> {
        let bad = |offset: usize, msg: String| Error::format(source, offset as u64, msg);
        let mut pos = 0usize;
        let next_line = |pos: &mut usize| -> Result<(usize, String)> {
            let start = *pos;
            let end = bytes[start..]
                .iter()
                .position(|&b| b == b'\n')
                .ok_or_else(|| bad(start, "header ends before `end` line".into()))?;
            *pos = start + end + 1;
            let line = std::str::from_utf8(&bytes[start..start + end])
                .map_err(|_| bad(start, "header is not UTF-8".into()))?;
            Ok((start, line.to_string()))
        };
        let (_, magic) = next_line(&mut pos)?;
        if magic != MAGIC {
            return Err(bad(0, format!("not a checkpoint (first line {magic:?})")));
        }
        let mut ck = Checkpoint {
            config_hash: String::new(),
            step: 0,
            lr: 0.0,
            plateau_best: None,
            plateau_bad: 0,
            optimizer_step: 0,
            params: Vec::new(),
            optimizer: Vec::new(),
        };
        let mut state_lens = Vec::new();
        loop {
            let (at, line) = next_line(&mut pos)?;
            if line == "end" {
                break;
            }
            let parts: Vec<&str> = line.split(' ').collect();
            let num = |s: &str| -> Result<u64> { s.parse().map_err(|_| bad(at, format!("bad number {s:?}"))) };
            match parts.as_slice() {
                ["config_hash", h] => ck.config_hash = h.to_string(),
                ["dtype", d] if *d == S::DTYPE => {}
                ["dtype", d] => return Err(bad(at, format!("dtype {d} but expected {}", S::DTYPE))),
                ["step", s] => ck.step = num(s)?,
                ["lr", s] => ck.lr = s.parse().map_err(|_| bad(at, format!("bad lr {s:?}")))?,
                ["plateau_best", "none"] => ck.plateau_best = None,
                ["plateau_best", s] => {
                    ck.plateau_best = Some(s.parse().map_err(|_| bad(at, format!("bad value {s:?}")))?)
                }
                ["plateau_bad", s] => ck.plateau_bad = num(s)? as usize,
                ["optimizer_step", s] => ck.optimizer_step = num(s)?,
                ["param", name, shape] => {
                    let dims = shape
                        .split('x')
                        .map(|d| num(d).map(|v| v as usize))
                        .collect::<Result<Vec<_>>>()?;
                    ck.params.push((name.to_string(), dims, Vec::new()));
                }
                ["state", name, len] => state_lens.push((name.to_string(), num(len)? as usize)),
                _ => return Err(bad(at, format!("unrecognised header line {line:?}"))),
            }
        }
        let total: usize = ck.params.iter().map(|(_, s, _)| s.iter().product::<usize>()).sum::<usize>()
            + state_lens.iter().map(|(_, l)| l).sum::<usize>();
        let body = &bytes[pos..];
        if body.len() != total * S::BYTES {
            return Err(bad(
                pos,
                format!("header describes {} bytes of data but {} follow", total * S::BYTES, body.len()),
            ));
        }
        let mut chunks = body.chunks_exact(S::BYTES).map(S::read_le);
        for (_, shape, data) in &mut ck.params {
            *data = chunks.by_ref().take(shape.iter().product()).collect();
        }
        for (name, len) in state_lens {
            ck.optimizer.push((name, chunks.by_ref().take(len).collect()));
        }
        Ok(ck)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes, &path.display().to_string())
    }

    /// Lists every disagreement with the expected hash and parameter table.
    pub fn diff(&self, config_hash: &str, params: &ModelParams<S>) -> Vec<String> {
        let mut out = Vec::new();
        if self.config_hash != config_hash {
            out.push(format!("config hash: checkpoint {} vs config {config_hash}", self.config_hash));
        }
        for (name, shape, _) in &self.params {
            match params.by_name(name) {
                None => out.push(format!("{name}: in checkpoint but not in model")),
                Some(t) if t.shape() != shape.as_slice() => out.push(format!(
                    "{name}: shape {} in checkpoint vs {} in model",
                    fmt_shape(shape),
                    fmt_shape(t.shape())
                )),
                Some(_) => {}
            }
        }
        for name in params.names() {
            if !self.params.iter().any(|(n, _, _)| n == name) {
                out.push(format!("{name}: in model but not in checkpoint"));
            }
        }
        if self.params.iter().map(|(n, _, _)| n).ne(params.names().iter()) && out.is_empty() {
            out.push("parameter order differs".into());
        }
        out
    }

    /// Copies the stored parameters into `params` after checking the hash
    /// and shape table; refuses with the full diff otherwise.
    pub fn restore_params(&self, config_hash: &str, params: &mut ModelParams<S>) -> Result<()> {
        let diff = self.diff(config_hash, params);
        if !diff.is_empty() {
            return Err(Error::Checkpoint(format!("checkpoint does not match:\n  {}", diff.join("\n  "))));
        }
        for ((_, _, data), t) in self.params.iter().zip(params.tensors_mut()) {
            t.data_mut().copy_from_slice(data);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;

    fn sample() -> (Checkpoint<f32>, ModelParams<f32>) {
        let mut p = ModelParams::new();
        p.add("a.w", Tensor::from_vec(vec![1.0, -2.5, 3.25, f32::MIN_POSITIVE], [2, 2]).unwrap())
            .unwrap();
        p.add("a.b", Tensor::from_vec(vec![0.1f32], [1]).unwrap()).unwrap();
        let ck = Checkpoint {
            config_hash: "abc".into(),
            step: 7,
            lr: 0.001,
            plateau_best: Some(0.25),
            plateau_bad: 2,
            optimizer_step: 7,
            params: p.iter().map(|(n, t)| (n.to_string(), t.shape().to_vec(), t.data().to_vec())).collect(),
            optimizer: vec![("first.0".into(), vec![0.5; 4]), ("first.1".into(), vec![1e-9])],
        };
        (ck, p)
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let (ck, _) = sample();
        let bytes = ck.to_bytes();
        let back = Checkpoint::<f32>::from_bytes(&bytes, "mem").unwrap();
        assert_eq!(back, ck);
        assert_eq!(back.to_bytes(), bytes);
    }

    #[test]
    fn wrong_dtype_and_truncation_are_rejected() {
        let (ck, _) = sample();
        let bytes = ck.to_bytes();
        assert!(Checkpoint::<f64>::from_bytes(&bytes, "mem").is_err());
        assert!(Checkpoint::<f32>::from_bytes(&bytes[..bytes.len() - 1], "mem").is_err());
    }

    #[test]
    fn mismatches_are_reported() {
        let (ck, mut p) = sample();
        assert!(ck.restore_params("abc", &mut p).is_ok());
        let err = ck.restore_params("xyz", &mut p).unwrap_err().to_string();
        assert!(err.contains("config hash"), "{err}");
        let mut other = ModelParams::<f32>::new();
        other.add("a.w", Tensor::zeros([4])).unwrap();
        let diff = ck.diff("abc", &other);
        assert_eq!(diff.len(), 2, "{diff:?}");
    }
}
