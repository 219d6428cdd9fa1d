use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::scalar::Scalar;

use super::{BatchInputs, LossKind, TaskBatch, Targets};

/// Number of digits to memorise and recall.
pub const COPY_PAYLOAD: usize = 10;
/// Output classes: digits 0..=9.
pub const COPY_ALPHABET: usize = 10;
/// Marks the start of recall (and fills the recall window of the input).
pub const COPY_DELIMITER: usize = 9;

/// Copy memory: sequences of length `T + 20`. The input carries 10 digits
/// from `1..=8`, then `T − 1` blanks, then eleven 9s (the first is the
/// delimiter). The target is blank everywhere except the final 10
/// positions, which repeat the payload.
pub fn gen_copy_memory<S: Scalar>(n_samples: usize, seq_len: usize, seed: u64) -> Result<TaskBatch<S>> {
    let len = seq_len + 2 * COPY_PAYLOAD;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = vec![0usize; n_samples * len];
    let mut y = vec![0usize; n_samples * len];
    let mut mask = vec![S::zero(); n_samples * len];
    for i in 0..n_samples {
        let row = i * len;
        for p in 0..COPY_PAYLOAD {
            let digit = rng.random_range(1..=8usize);
            x[row + p] = digit;
            y[row + len - COPY_PAYLOAD + p] = digit;
            mask[row + len - COPY_PAYLOAD + p] = S::one();
        }
        for t in len - COPY_PAYLOAD - 1..len {
            x[row + t] = COPY_DELIMITER;
        }
    }
    Ok(TaskBatch {
        inputs: BatchInputs::Tokens {
            tokens: x,
            batch: n_samples,
            len,
        },
        targets: Targets::Labels(y),
        loss_kind: LossKind::CePerStep,
        mask: Some(mask),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn structure() {
        for t in [1usize, 5, 50] {
            let b = gen_copy_memory::<f32>(20, t, 11).unwrap();
            let BatchInputs::Tokens { tokens, len, .. } = &b.inputs else { panic!() };
            let Targets::Labels(y) = &b.targets else { panic!() };
            assert_eq!(*len, t + 20);
            for row in 0..20 {
                let x = &tokens[row * len..(row + 1) * len];
                let yr = &y[row * len..(row + 1) * len];
                assert!(x[..10].iter().all(|d| (1..=8).contains(d)));
                assert!(x[10..=t + 8].iter().all(|&d| d == 0));
                assert!(x[t + 9..t + 20].iter().all(|&d| d == 9));
                assert!(yr[..t + 10].iter().all(|&d| d == 0));
                assert_eq!(&yr[t + 10..], &x[..10]);
            }
            let mask = b.mask.as_ref().unwrap();
            assert_eq!(mask.iter().filter(|&&m| m == 1.0).count(), 20 * 10);
        }
    }
}
