//! Temporal convolutional networks and recurrent baselines for sequence
//! modelling, built on a small reverse-mode autodiff engine.
//!
//! The numeric core is generic over [`Scalar`]; training runs in `f32` and
//! gradient checks in `f64`. The aliases below name the two precisions.

pub mod autodiff;
pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod error;
pub mod nn;
pub mod optim;
pub mod scalar;
pub mod tasks;
pub mod tensor;
pub mod trainer;
pub mod verify;

pub use autodiff::{Tape, Var};
pub use error::{Error, Result};
pub use scalar::Scalar;
pub use tensor::Tensor;

/// Training precision.
pub type Tensor32 = Tensor<f32>;
/// Gradient-check precision.
pub type Tensor64 = Tensor<f64>;
pub type Tape32 = Tape<f32>;
pub type Tape64 = Tape<f64>;
pub type Model32 = nn::SequenceModel<f32>;
pub type Model64 = nn::SequenceModel<f64>;
