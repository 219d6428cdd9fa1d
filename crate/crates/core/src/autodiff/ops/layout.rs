use crate::autodiff::tape::{GradSink, Op, Tape, Var};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

impl<S: Scalar> Tape<S> {
    /// `x [batch, ch, T] -> [batch, ch]` at step `t`.
    pub fn select_time(&mut self, x: Var, t: usize) -> Result<Var> {
        let s = self.shape(x);
        let [batch, ch, len] = *s else {
            return Err(Error::shape(format!("select_time expects [batch, ch, T], got {s:?}")));
        };
        if t >= len {
            return Err(Error::shape(format!("time index {t} outside length {len}")));
        }
        let d = self.data(x);
        let out: Vec<S> = (0..batch * ch).map(|r| d[r * len + t]).collect();
        let value = Tensor::from_vec(out, [batch, ch])?;
        Ok(self.push(value, Op::SelectTime { x, t }, &[x]))
    }

    /// Final time step of `x [batch, ch, T]`.
    pub fn select_last_step(&mut self, x: Var) -> Result<Var> {
        let len = self.shape(x).get(2).copied().unwrap_or(0);
        if len == 0 {
            return Err(Error::shape("select_last_step on an empty sequence"));
        }
        self.select_time(x, len - 1)
    }

    /// Stacks `T` tensors of shape `[batch, ch]` into `[batch, ch, T]`.
    pub fn stack_time(&mut self, parts: &[Var]) -> Result<Var> {
        let Some(&first) = parts.first() else {
            return Err(Error::shape("stack_time of zero steps"));
        };
        let s = self.shape(first).to_vec();
        if s.len() != 2 || parts.iter().any(|&p| self.shape(p) != s.as_slice()) {
            return Err(Error::shape("stack_time needs equal [batch, ch] parts"));
        }
        let len = parts.len();
        let rows = s[0] * s[1];
        let mut out = vec![S::zero(); rows * len];
        for (t, &p) in parts.iter().enumerate() {
            for (r, &v) in self.data(p).iter().enumerate() {
                out[r * len + t] = v;
            }
        }
        let value = Tensor::from_vec(out, [s[0], s[1], len])?;
        Ok(self.push(value, Op::StackTime { parts: parts.to_vec() }, parts))
    }

    /// Columns `start..start + width` of `x [batch, n]`.
    pub fn slice_cols(&mut self, x: Var, start: usize, width: usize) -> Result<Var> {
        let s = self.shape(x);
        let [batch, n] = *s else {
            return Err(Error::shape(format!("slice_cols expects [batch, n], got {s:?}")));
        };
        if start + width > n {
            return Err(Error::shape(format!("columns {start}..{} outside width {n}", start + width)));
        }
        let d = self.data(x);
        let mut out = Vec::with_capacity(batch * width);
        for r in 0..batch {
            out.extend_from_slice(&d[r * n + start..r * n + start + width]);
        }
        let value = Tensor::from_vec(out, [batch, width])?;
        Ok(self.push(value, Op::SliceCols { x, start }, &[x]))
    }

    /// Row lookup: `tokens [batch, T]` into `table [vocab, dim]`, producing
    /// `[batch, dim, T]`.
    pub fn embedding(&mut self, table: Var, tokens: &[usize], batch: usize) -> Result<Var> {
        let s = self.shape(table);
        let [vocab, dim] = *s else {
            return Err(Error::shape(format!("embedding table must be [vocab, dim], got {s:?}")));
        };
        if batch == 0 || !tokens.len().is_multiple_of(batch) {
            return Err(Error::shape(format!("{} tokens do not split into {batch} rows", tokens.len())));
        }
        if let Some(&bad) = tokens.iter().find(|&&tok| tok >= vocab) {
            return Err(Error::domain(format!("token {bad} outside vocabulary of {vocab}")));
        }
        let len = tokens.len() / batch;
        let d = self.data(table);
        let mut out = vec![S::zero(); batch * dim * len];
        for b in 0..batch {
            for t in 0..len {
                let row = &d[tokens[b * len + t] * dim..][..dim];
                for (e, &v) in row.iter().enumerate() {
                    out[(b * dim + e) * len + t] = v;
                }
            }
        }
        let value = Tensor::from_vec(out, [batch, dim, len])?;
        let op = Op::Embedding {
            table,
            tokens: tokens.to_vec(),
        };
        Ok(self.push(value, op, &[table]))
    }
}

pub(super) fn select_time_backward<S: Scalar>(x: Var, t: usize, gout: &[S], sink: &mut GradSink<'_, S>) {
    if !sink.wants(x) {
        return;
    }
    let len = sink.value(x).shape()[2];
    let gx = sink.slot(x);
    for (r, &d) in gout.iter().enumerate() {
        gx[r * len + t] += d;
    }
}

pub(super) fn stack_time_backward<S: Scalar>(parts: &[Var], gout: &[S], sink: &mut GradSink<'_, S>) {
    let len = parts.len();
    for (t, &p) in parts.iter().enumerate() {
        if !sink.wants(p) {
            continue;
        }
        let gp = sink.slot(p);
        for (r, g) in gp.iter_mut().enumerate() {
            *g += gout[r * len + t];
        }
    }
}

pub(super) fn slice_cols_backward<S: Scalar>(
    x: Var,
    start: usize,
    out: &Tensor<S>,
    gout: &[S],
    sink: &mut GradSink<'_, S>,
) {
    if !sink.wants(x) {
        return;
    }
    let n = sink.value(x).shape()[1];
    let [batch, width] = *out.shape() else { unreachable!() };
    let gx = sink.slot(x);
    for r in 0..batch {
        for (g, &d) in gx[r * n + start..r * n + start + width].iter_mut().zip(&gout[r * width..(r + 1) * width]) {
            *g += d;
        }
    }
}

pub(super) fn embedding_backward<S: Scalar>(
    table: Var,
    tokens: &[usize],
    out: &Tensor<S>,
    gout: &[S],
    sink: &mut GradSink<'_, S>,
) {
    if !sink.wants(table) {
        return;
    }
    let [batch, dim, len] = *out.shape() else { unreachable!() };
    let gt = sink.slot(table);
    for b in 0..batch {
        for t in 0..len {
            let tok = tokens[b * len + t];
            for e in 0..dim {
                gt[tok * dim + e] += gout[(b * dim + e) * len + t];
            }
        }
    }
}
