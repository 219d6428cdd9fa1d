use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

use super::ops::{ActivationKind, BinaryKind};

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(pub(crate) usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Backward rule plus whatever the forward pass saved for it.
pub(crate) enum Op<S> {
    Leaf,
    Conv1d {
        x: Var,
        w: Var,
        b: Option<Var>,
        dilation: usize,
    },
    Linear {
        x: Var,
        w: Var,
        b: Option<Var>,
    },
    MatMul {
        a: Var,
        b: Var,
    },
    Binary {
        kind: BinaryKind,
        a: Var,
        b: Var,
    },
    Activation {
        kind: ActivationKind,
        x: Var,
    },
    Scale {
        x: Var,
        factor: S,
    },
    Sum {
        x: Var,
    },
    Mse {
        pred: Var,
        target: Vec<S>,
    },
    CrossEntropy {
        logits: Var,
        labels: Vec<usize>,
        weights: Option<Vec<S>>,
        probs: Vec<S>,
        norm: S,
    },
    BernoulliNll {
        logits: Var,
        targets: Vec<S>,
        norm: S,
    },
    WeightNorm {
        v: Var,
        g: Var,
        norms: Vec<S>,
    },
    Dropout {
        x: Var,
        mask: Vec<S>,
    },
    SelectTime {
        x: Var,
        t: usize,
    },
    StackTime {
        parts: Vec<Var>,
    },
    SliceCols {
        x: Var,
        start: usize,
    },
    Embedding {
        table: Var,
        tokens: Vec<usize>,
    },
}

pub(crate) struct Node<S> {
    pub(crate) value: Tensor<S>,
    pub(crate) op: Op<S>,
    pub(crate) needs_grad: bool,
}

/// Linear record of a forward computation.
///
/// Operations append nodes in execution order, so node indices are already a
/// topological order; [`Tape::backward`] walks them once in reverse.
pub struct Tape<S> {
    pub(crate) nodes: Vec<Node<S>>,
    grads: Vec<Option<Vec<S>>>,
}

impl<S: Scalar> Default for Tape<S> {
    fn default() -> Self {
        Self::new()
    }
}

impl<S: Scalar> Tape<S> {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            grads: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Records an input. Gradients are tracked iff `tensor.requires_grad()`.
    pub fn leaf(&mut self, tensor: Tensor<S>) -> Var {
        let needs_grad = tensor.requires_grad();
        let mut value = tensor;
        value.clear_grad();
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    /// Records an input that never receives a gradient.
    pub fn constant(&mut self, tensor: Tensor<S>) -> Var {
        self.leaf(tensor.with_requires_grad(false))
    }

    pub fn value(&self, v: Var) -> &Tensor<S> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    pub fn data(&self, v: Var) -> &[S] {
        self.nodes[v.0].value.data()
    }

    pub fn needs_grad(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    /// Gradient of the last `backward` call with respect to a leaf.
    pub fn grad(&self, v: Var) -> Option<&[S]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }

    /// Adds the leaf gradient for `v` into `target`'s accumulator.
    pub fn accumulate_into(&self, v: Var, target: &mut Tensor<S>) -> Result<()> {
        if let Some(g) = self.grad(v) {
            target.accumulate_grad(g)?;
        }
        Ok(())
    }

    pub(crate) fn push(&mut self, value: Tensor<S>, op: Op<S>, inputs: &[Var]) -> Var {
        let needs_grad = inputs.iter().any(|&v| self.nodes[v.0].needs_grad);
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    /// Reverse-mode sweep from a scalar `loss`.
    ///
    /// Leaf gradients are stored on the tape and read back with
    /// [`Tape::grad`] or [`Tape::accumulate_into`]. Repeated uses of a value
    /// accumulate additively.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        let n = self.nodes.len();
        if loss.0 >= n {
            return Err(Error::Contract("loss is not recorded on this tape".into()));
        }
        if self.nodes[loss.0].value.len() != 1 {
            return Err(Error::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.nodes[loss.0].value.shape()
            )));
        }
        let mut grads: Vec<Option<Vec<S>>> = Vec::with_capacity(n);
        grads.resize_with(n, || None);
        grads[loss.0] = Some(vec![S::one()]);

        for i in (0..=loss.0).rev() {
            let node = &self.nodes[i];
            if !node.needs_grad {
                continue;
            }
            let Some(g) = grads[i].take() else {
                continue;
            };
            if let Op::Leaf = node.op {
                grads[i] = Some(g);
                continue;
            }
            let mut sink = GradSink {
                nodes: &self.nodes,
                grads: &mut grads,
            };
            super::ops::backward_node(&node.op, &node.value, &g, &mut sink);
        }
        self.grads = grads;
        Ok(())
    }
}

/// Where an op's backward rule deposits input gradients.
pub(crate) struct GradSink<'a, S> {
    pub(crate) nodes: &'a [Node<S>],
    grads: &'a mut [Option<Vec<S>>],
}

impl<'a, S: Scalar> GradSink<'a, S> {
    pub(crate) fn wants(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    pub(crate) fn value(&self, v: Var) -> &'a Tensor<S> {
        &self.nodes[v.0].value
    }

    /// Zero-initialised accumulator for `v`.
    pub(crate) fn slot(&mut self, v: Var) -> &mut [S] {
        let len = self.nodes[v.0].value.len();
        self.grads[v.0].get_or_insert_with(|| vec![S::zero(); len])
    }
}
