//! Differentiable operations recorded on a [`Tape`](super::Tape).

mod conv;
mod dense;
mod layout;
mod loss;
mod norm;
mod pointwise;


use crate::scalar::Scalar;
use crate::tensor::Tensor;

use super::tape::{GradSink, Op};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinaryKind {
    Add,
    Sub,
    Mul,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ActivationKind {
    Relu,
    Sigmoid,
    Tanh,
}

pub(crate) fn backward_node<S: Scalar>(
    op: &Op<S>,
    out: &Tensor<S>,
    gout: &[S],
    sink: &mut GradSink<'_, S>,
) {
    match op {
        Op::Leaf => {}
        Op::Conv1d { x, w, b, dilation } => conv::conv1d_backward(*x, *w, *b, *dilation, gout, sink),
        Op::Linear { x, w, b } => dense::linear_backward(*x, *w, *b, gout, sink),
        Op::MatMul { a, b } => dense::matmul_backward(*a, *b, gout, sink),
        Op::Binary { kind, a, b } => pointwise::binary_backward(*kind, *a, *b, gout, sink),
        Op::Activation { kind, x } => pointwise::activation_backward(*kind, *x, out, gout, sink),
        Op::Scale { x, factor } => pointwise::scale_backward(*x, *factor, gout, sink),
        Op::Sum { x } => pointwise::sum_backward(*x, gout, sink),
        Op::Dropout { x, mask } => pointwise::dropout_backward(*x, mask, gout, sink),
        Op::Mse { pred, target } => loss::mse_backward(*pred, target, gout, sink),
        Op::CrossEntropy {
            logits,
            labels,
            weights,
            probs,
            norm,
        } => loss::cross_entropy_backward(*logits, labels, weights.as_deref(), probs, *norm, gout, sink),
        Op::BernoulliNll {
            logits,
            targets,
            norm,
        } => loss::bernoulli_backward(*logits, targets, *norm, gout, sink),
        Op::WeightNorm { v, g, norms } => norm::weight_norm_backward(*v, *g, norms, out, gout, sink),
        Op::SelectTime { x, t } => layout::select_time_backward(*x, *t, gout, sink),
        Op::StackTime { parts } => layout::stack_time_backward(parts, gout, sink),
        Op::SliceCols { x, start } => layout::slice_cols_backward(*x, *start, out, gout, sink),
        Op::Embedding { table, tokens } => layout::embedding_backward(*table, tokens, out, gout, sink),
    }
}
