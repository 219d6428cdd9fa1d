//! Parameter initialisers.

use rand::Rng;
use rand_distr::{Distribution, Normal, Uniform};

use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Standard deviation of the Gaussian used for convolutional and linear
/// weights.
pub const WEIGHT_STD: f64 = 0.01;

/// Starting magnitude `g` of every weight-normalised filter: the
/// per-channel norm of a uniform `±1/√fan_in` draw, `√(1/3)`. Only the
/// direction `v` is drawn from the Gaussian above.
pub const INITIAL_FILTER_NORM: f64 = 0.577_350_269_189_625_8;

pub fn normal<S: Scalar, R: Rng + ?Sized>(shape: &[usize], std: f64, rng: &mut R) -> Tensor<S> {
    let dist = Normal::new(0.0, std).expect("finite std");
    let n = shape.iter().product();
    let data = (0..n).map(|_| S::from_f64(dist.sample(rng))).collect();
    Tensor::from_vec(data, shape.to_vec()).expect("shape matches")
}

pub fn uniform<S: Scalar, R: Rng + ?Sized>(shape: &[usize], bound: f64, rng: &mut R) -> Tensor<S> {
    let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
    let n = shape.iter().product();
    let data = (0..n).map(|_| S::from_f64(dist.sample(rng))).collect();
    Tensor::from_vec(data, shape.to_vec()).expect("shape matches")
}

/// Per-output-channel L2 norms of `v` (leading axis).
pub fn channel_norms<S: Scalar>(v: &Tensor<S>) -> Tensor<S> {
    let out = v.shape()[0];
    let row = v.len() / out.max(1);
    let norms = v
        .data()
        .chunks(row.max(1))
        .map(|c| c.iter().map(|&x| x * x).sum::<S>().sqrt())
        .collect();
    Tensor::from_vec(norms, [out]).expect("one norm per channel")
}
