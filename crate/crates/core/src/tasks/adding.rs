use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

use super::{BatchInputs, LossKind, TaskBatch, Targets};

/// Adding problem: inputs `[n, 2, T]` where row 0 holds `U[0, 1]` values and
/// row 1 marks two distinct positions with 1. The target is the sum of the
/// two marked values.
pub fn gen_adding<S: Scalar>(n_samples: usize, seq_len: usize, seed: u64) -> Result<TaskBatch<S>> {
    if seq_len < 2 {
        return Err(Error::domain(format!("adding problem needs T >= 2, got {seq_len}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = vec![S::zero(); n_samples * 2 * seq_len];
    let mut y = Vec::with_capacity(n_samples);
    for i in 0..n_samples {
        let base = i * 2 * seq_len;
        for t in 0..seq_len {
            x[base + t] = S::from_f64(rng.random::<f64>());
        }
        let marks = sample(&mut rng, seq_len, 2);
        let mut target = S::zero();
        for m in marks.iter() {
            x[base + seq_len + m] = S::one();
            target += x[base + m];
        }
        y.push(target);
    }
    Ok(TaskBatch {
        inputs: BatchInputs::Dense(Tensor::from_vec(x, [n_samples, 2, seq_len])?),
        targets: Targets::Values(y),
        loss_kind: LossKind::MseLastStep,
        mask: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_short_sequences() {
        assert!(gen_adding::<f32>(4, 1, 0).is_err());
        assert!(gen_adding::<f32>(4, 2, 0).is_ok());
    }

    #[test]
    fn target_is_dot_of_rows() {
        let b = gen_adding::<f64>(200, 30, 7).unwrap();
        let BatchInputs::Dense(x) = &b.inputs else { panic!() };
        let Targets::Values(y) = &b.targets else { panic!() };
        for i in 0..200 {
            let row = &x.data()[i * 60..(i + 1) * 60];
            let (vals, marks) = row.split_at(30);
            assert_eq!(marks.iter().filter(|&&m| m == 1.0).count(), 2);
            assert!(marks.iter().all(|&m| m == 0.0 || m == 1.0));
            assert!(vals.iter().all(|&v| (0.0..1.0).contains(&v)));
            let dot: f64 = vals.iter().zip(marks).map(|(a, b)| a * b).sum();
            assert_eq!(dot, y[i]);
        }
    }

    #[test]
    fn same_seed_same_batch() {
        assert_eq!(gen_adding::<f32>(8, 20, 3).unwrap(), gen_adding::<f32>(8, 20, 3).unwrap());
        assert_ne!(gen_adding::<f32>(8, 20, 3).unwrap(), gen_adding::<f32>(8, 20, 4).unwrap());
    }
}
