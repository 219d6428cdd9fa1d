use rand::Rng;

use crate::autodiff::tape::{GradSink, Op, Tape, Var};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

use super::{ActivationKind, BinaryKind};

impl<S: Scalar> Tape<S> {
    /// Pointwise `a (op) b`. `b` may have the shape of a trailing suffix of
    /// `a`'s shape (e.g. a `[n]` bias against `[m, n]`), in which case it is
    /// repeated along the leading dimensions.
    pub fn elementwise(&mut self, kind: BinaryKind, a: Var, b: Var) -> Result<Var> {
        let sa = self.shape(a);
        let sb = self.shape(b);
        if sb.len() > sa.len() || sa[sa.len() - sb.len()..] != *sb {
            return Err(Error::shape(format!("cannot broadcast {sb:?} against {sa:?}")));
        }
        let ad = self.data(a);
        let bd = self.data(b);
        let inner = bd.len().max(1);
        let mut out = Vec::with_capacity(ad.len());
        for chunk in ad.chunks(inner) {
            match kind {
                BinaryKind::Add => out.extend(chunk.iter().zip(bd).map(|(&x, &y)| x + y)),
                BinaryKind::Sub => out.extend(chunk.iter().zip(bd).map(|(&x, &y)| x - y)),
                BinaryKind::Mul => out.extend(chunk.iter().zip(bd).map(|(&x, &y)| x * y)),
            }
        }
        let value = Tensor::from_vec(out, sa.to_vec())?;
        Ok(self.push(value, Op::Binary { kind, a, b }, &[a, b]))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.elementwise(BinaryKind::Add, a, b)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.elementwise(BinaryKind::Sub, a, b)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.elementwise(BinaryKind::Mul, a, b)
    }

    pub fn activation(&mut self, kind: ActivationKind, x: Var) -> Var {
        let xv = self.value(x);
        let data: Vec<S> = match kind {
            ActivationKind::Relu => xv.data().iter().map(|&v| v.max(S::zero())).collect(),
            ActivationKind::Sigmoid => xv.data().iter().map(|&v| sigmoid(v)).collect(),
            ActivationKind::Tanh => xv.data().iter().map(|&v| v.tanh()).collect(),
        };
        let value = Tensor::from_vec(data, xv.shape().to_vec()).expect("same shape");
        self.push(value, Op::Activation { kind, x }, &[x])
    }

    pub fn relu(&mut self, x: Var) -> Var {
        self.activation(ActivationKind::Relu, x)
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        self.activation(ActivationKind::Sigmoid, x)
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        self.activation(ActivationKind::Tanh, x)
    }

    pub fn scale(&mut self, x: Var, factor: S) -> Var {
        let xv = self.value(x);
        let data = xv.data().iter().map(|&v| v * factor).collect();
        let value = Tensor::from_vec(data, xv.shape().to_vec()).expect("same shape");
        self.push(value, Op::Scale { x, factor }, &[x])
    }

    /// Sum of all elements as a scalar.
    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.data(x).iter().copied().sum::<S>();
        self.push(Tensor::scalar(s), Op::Sum { x }, &[x])
    }

    /// Spatial dropout: each `(batch, channel)` row of `x [batch, ch, T]`
    /// (or each entry of `x [batch, ch]`) is zeroed with probability `p`
    /// and survivors are scaled by `1 / (1 - p)`. Identity when not training
    /// or when `p == 0`.
    pub fn channel_dropout<R: Rng + ?Sized>(&mut self, x: Var, p: f64, training: bool, rng: &mut R) -> Result<Var> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::domain(format!("dropout probability {p} outside [0, 1)")));
        }
        let shape = self.shape(x);
        if shape.len() < 2 {
            return Err(Error::shape(format!("channel dropout needs [batch, ch, ...], got {shape:?}")));
        }
        if !training || p == 0.0 {
            return Ok(x);
        }
        let rows = shape[0] * shape[1];
        let keep = S::from_f64(1.0 / (1.0 - p));
        let mask: Vec<S> = (0..rows)
            .map(|_| if rng.random::<f64>() < p { S::zero() } else { keep })
            .collect();
        let xd = self.data(x);
        let group = xd.len() / rows.max(1);
        let mut out = Vec::with_capacity(xd.len());
        for (chunk, &m) in xd.chunks(group.max(1)).zip(&mask) {
            out.extend(chunk.iter().map(|&v| v * m));
        }
        let value = Tensor::from_vec(out, shape.to_vec())?;
        Ok(self.push(value, Op::Dropout { x, mask }, &[x]))
    }
}

#[inline]
pub(crate) fn sigmoid<S: Scalar>(v: S) -> S {
    if v >= S::zero() {
        S::one() / (S::one() + (-v).exp())
    } else {
        let e = v.exp();
        e / (S::one() + e)
    }
}

pub(super) fn binary_backward<S: Scalar>(kind: BinaryKind, a: Var, b: Var, gout: &[S], sink: &mut GradSink<'_, S>) {
    let ad = sink.value(a).data();
    let bd = sink.value(b).data();
    let inner = bd.len().max(1);
    if sink.wants(a) {
        let ga = sink.slot(a);
        match kind {
            BinaryKind::Add | BinaryKind::Sub => ga.iter_mut().zip(gout).for_each(|(g, &d)| *g += d),
            BinaryKind::Mul => {
                for (gc, dc) in ga.chunks_mut(inner).zip(gout.chunks(inner)) {
                    for ((g, &d), &y) in gc.iter_mut().zip(dc).zip(bd) {
                        *g += d * y;
                    }
                }
            }
        }
    }
    if sink.wants(b) {
        let gb = sink.slot(b);
        for (k, dc) in gout.chunks(inner).enumerate() {
            match kind {
                BinaryKind::Add => gb.iter_mut().zip(dc).for_each(|(g, &d)| *g += d),
                BinaryKind::Sub => gb.iter_mut().zip(dc).for_each(|(g, &d)| *g -= d),
                BinaryKind::Mul => {
                    let ac = &ad[k * inner..(k + 1) * inner];
                    for ((g, &d), &x) in gb.iter_mut().zip(dc).zip(ac) {
                        *g += d * x;
                    }
                }
            }
        }
    }
}

pub(super) fn activation_backward<S: Scalar>(
    kind: ActivationKind,
    x: Var,
    out: &Tensor<S>,
    gout: &[S],
    sink: &mut GradSink<'_, S>,
) {
    if !sink.wants(x) {
        return;
    }
    let y = out.data();
    let gx = sink.slot(x);
    match kind {
        ActivationKind::Relu => {
            for ((g, &d), &yv) in gx.iter_mut().zip(gout).zip(y) {
                if yv > S::zero() {
                    *g += d;
                }
            }
        }
        ActivationKind::Sigmoid => {
            for ((g, &d), &yv) in gx.iter_mut().zip(gout).zip(y) {
                *g += d * yv * (S::one() - yv);
            }
        }
        ActivationKind::Tanh => {
            for ((g, &d), &yv) in gx.iter_mut().zip(gout).zip(y) {
                *g += d * (S::one() - yv * yv);
            }
        }
    }
}

pub(super) fn scale_backward<S: Scalar>(x: Var, factor: S, gout: &[S], sink: &mut GradSink<'_, S>) {
    if sink.wants(x) {
        sink.slot(x).iter_mut().zip(gout).for_each(|(g, &d)| *g += d * factor);
    }
}

pub(super) fn sum_backward<S: Scalar>(x: Var, gout: &[S], sink: &mut GradSink<'_, S>) {
    if sink.wants(x) {
        let d = gout[0];
        sink.slot(x).iter_mut().for_each(|g| *g += d);
    }
}

pub(super) fn dropout_backward<S: Scalar>(x: Var, mask: &[S], gout: &[S], sink: &mut GradSink<'_, S>) {
    if !sink.wants(x) {
        return;
    }
    let group = gout.len() / mask.len().max(1);
    let gx = sink.slot(x);
    for ((gc, dc), &m) in gx.chunks_mut(group.max(1)).zip(gout.chunks(group.max(1))).zip(mask) {
        gc.iter_mut().zip(dc).for_each(|(g, &d)| *g += d * m);
    }
}
