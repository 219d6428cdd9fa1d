//! Reverse-mode automatic differentiation over dense tensors.
//!
//! A [`Tape`] records each operation as it runs. Values are addressed by
//! [`Var`] handles; after [`Tape::backward`] the gradient of every leaf that
//! was recorded with `requires_grad` can be read back.

mod clip;
pub mod ops;
mod tape;

pub use clip::{clip_grad_global_norm, global_grad_norm};
pub use ops::{ActivationKind, BinaryKind};
pub use tape::{Tape, Var};

/// Backward for a scalar loss on `tape`; see [`Tape::backward`].
pub fn backward<S: crate::Scalar>(loss: Var, tape: &mut Tape<S>) -> crate::Result<()> {
    tape.backward(loss)
}
