use crate::autodiff::tape::{GradSink, Op, Tape, Var};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

use super::pointwise::sigmoid;

/// `(batch, classes, steps)` of logits laid out as `[batch, classes]` or
/// `[batch, classes, T]`.
fn class_layout(shape: &[usize]) -> Result<(usize, usize, usize)> {
    match *shape {
        [b, c] => Ok((b, c, 1)),
        [b, c, t] => Ok((b, c, t)),
        _ => Err(Error::shape(format!("logits must be [batch, C] or [batch, C, T], got {shape:?}"))),
    }
}

impl<S: Scalar> Tape<S> {
    /// Mean squared error over all elements.
    pub fn mse(&mut self, pred: Var, target: &[S]) -> Result<Var> {
        let p = self.data(pred);
        if p.len() != target.len() {
            return Err(Error::shape(format!(
                "mse: prediction has {} elements, target {}",
                p.len(),
                target.len()
            )));
        }
        let n = S::from_usize(p.len().max(1));
        let loss = p.iter().zip(target).map(|(&a, &b)| (a - b) * (a - b)).sum::<S>() / n;
        let target = target.to_vec();
        Ok(self.push(Tensor::scalar(loss), Op::Mse { pred, target }, &[pred]))
    }

    /// Softmax cross entropy averaged over every `(batch, step)` position.
    ///
    /// `labels` is indexed `b * T + t`. With `weights`, the loss is the
    /// weighted mean `Σ w·nll / Σ w`.
    pub fn cross_entropy(&mut self, logits: Var, labels: &[usize], weights: Option<&[S]>) -> Result<Var> {
        let (batch, classes, steps) = class_layout(self.shape(logits))?;
        let positions = batch * steps;
        if labels.len() != positions {
            return Err(Error::shape(format!(
                "cross entropy: {} labels for {positions} positions",
                labels.len()
            )));
        }
        if let Some(w) = weights {
            if w.len() != positions {
                return Err(Error::shape(format!(
                    "cross entropy: {} weights for {positions} positions",
                    w.len()
                )));
            }
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= classes) {
            return Err(Error::domain(format!("label {bad} outside [0, {classes})")));
        }
        let norm = match weights {
            Some(w) => w.iter().copied().sum::<S>(),
            None => S::from_usize(positions),
        };
        if !(norm > S::zero()) {
            return Err(Error::domain("cross entropy has no positive-weight positions"));
        }
        let data = self.data(logits);
        let mut probs = vec![S::zero(); data.len()];
        let mut total = S::zero();
        for b in 0..batch {
            for t in 0..steps {
                let pos = b * steps + t;
                let idx = |c: usize| (b * classes + c) * steps + t;
                let m = (0..classes).map(|c| data[idx(c)]).fold(S::neg_infinity(), S::max);
                let mut z = S::zero();
                for c in 0..classes {
                    let e = (data[idx(c)] - m).exp();
                    probs[idx(c)] = e;
                    z += e;
                }
                for c in 0..classes {
                    probs[idx(c)] /= z;
                }
                let nll = m + z.ln() - data[idx(labels[pos])];
                total += weights.map_or(S::one(), |w| w[pos]) * nll;
            }
        }
        let op = Op::CrossEntropy {
            logits,
            labels: labels.to_vec(),
            weights: weights.map(<[S]>::to_vec),
            probs,
            norm,
        };
        Ok(self.push(Tensor::scalar(total / norm), op, &[logits]))
    }

    /// Independent-Bernoulli negative log likelihood with logits, summed over
    /// the key axis and averaged over `(batch, step)` positions.
    pub fn bernoulli_nll(&mut self, logits: Var, targets: &[S]) -> Result<Var> {
        let (batch, _keys, steps) = class_layout(self.shape(logits))?;
        let data = self.data(logits);
        if data.len() != targets.len() {
            return Err(Error::shape(format!(
                "bernoulli nll: {} logits, {} targets",
                data.len(),
                targets.len()
            )));
        }
        let norm = S::from_usize((batch * steps).max(1));
        let total = data
            .iter()
            .zip(targets)
            .map(|(&l, &y)| l.max(S::zero()) - l * y + (-l.abs()).exp().ln_1p())
            .sum::<S>();
        let op = Op::BernoulliNll {
            logits,
            targets: targets.to_vec(),
            norm,
        };
        Ok(self.push(Tensor::scalar(total / norm), op, &[logits]))
    }
}

pub(super) fn mse_backward<S: Scalar>(pred: Var, target: &[S], gout: &[S], sink: &mut GradSink<'_, S>) {
    if !sink.wants(pred) {
        return;
    }
    let p = sink.value(pred).data();
    let scale = gout[0] * S::from_f64(2.0) / S::from_usize(p.len().max(1));
    let gp = sink.slot(pred);
    for ((g, &a), &b) in gp.iter_mut().zip(p).zip(target) {
        *g += scale * (a - b);
    }
}

pub(super) fn cross_entropy_backward<S: Scalar>(
    logits: Var,
    labels: &[usize],
    weights: Option<&[S]>,
    probs: &[S],
    norm: S,
    gout: &[S],
    sink: &mut GradSink<'_, S>,
) {
    if !sink.wants(logits) {
        return;
    }
    let (batch, classes, steps) = class_layout(sink.value(logits).shape()).expect("validated in forward");
    let scale = gout[0] / norm;
    let gl = sink.slot(logits);
    for b in 0..batch {
        for t in 0..steps {
            let pos = b * steps + t;
            let w = weights.map_or(S::one(), |w| w[pos]) * scale;
            if w == S::zero() {
                continue;
            }
            for c in 0..classes {
                let idx = (b * classes + c) * steps + t;
                let onehot = if c == labels[pos] { S::one() } else { S::zero() };
                gl[idx] += w * (probs[idx] - onehot);
            }
        }
    }
}

pub(super) fn bernoulli_backward<S: Scalar>(
    logits: Var,
    targets: &[S],
    norm: S,
    gout: &[S],
    sink: &mut GradSink<'_, S>,
) {
    if !sink.wants(logits) {
        return;
    }
    let data = sink.value(logits).data();
    let scale = gout[0] / norm;
    let gl = sink.slot(logits);
    for ((g, &l), &y) in gl.iter_mut().zip(data).zip(targets) {
        *g += scale * (sigmoid(l) - y);
    }
}
