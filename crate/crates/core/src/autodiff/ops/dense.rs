use crate::autodiff::tape::{GradSink, Op, Tape, Var};
use crate::error::{Error, Result};
use crate::scalar::{axpy, dot, Scalar};
use crate::tensor::Tensor;

use super::conv::{conv_backward, conv_forward, ConvDims};

impl<S: Scalar> Tape<S> {
    /// Matrix product `a [m, p] · b [p, q] -> [m, q]`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            return Err(Error::shape(format!("matmul of {sa:?} and {sb:?}")));
        }
        let (m, p, q) = (sa[0], sa[1], sb[1]);
        let (ad, bd) = (self.data(a), self.data(b));
        let mut out = vec![S::zero(); m * q];
        for r in 0..m {
            let orow = &mut out[r * q..(r + 1) * q];
            for k in 0..p {
                axpy(ad[r * p + k], &bd[k * q..(k + 1) * q], orow);
            }
        }
        let value = Tensor::from_vec(out, [m, q])?;
        Ok(self.push(value, Op::MatMul { a, b }, &[a, b]))
    }

    /// Affine map with weight `[out, in]` applied to `x [batch, in]` or to
    /// every time step of `x [batch, in, T]`.
    pub fn linear(&mut self, x: Var, w: Var, b: Option<Var>) -> Result<Var> {
        let xs = self.shape(x).to_vec();
        let ws = self.shape(w).to_vec();
        if ws.len() != 2 || !(xs.len() == 2 || xs.len() == 3) || xs[1] != ws[1] {
            return Err(Error::shape(format!("linear of x {xs:?} with weight {ws:?}")));
        }
        let (out_f, in_f) = (ws[0], ws[1]);
        if let Some(b) = b {
            if self.shape(b) != [out_f] {
                return Err(Error::shape(format!("linear bias {:?}, expected [{out_f}]", self.shape(b))));
            }
        }
        let bias = b.map(|b| self.data(b));
        let value = if xs.len() == 3 {
            let dims = ConvDims {
                batch: xs[0],
                in_ch: in_f,
                out_ch: out_f,
                kernel: 1,
                len: xs[2],
                dilation: 1,
            };
            let mut out = vec![S::zero(); xs[0] * out_f * xs[2]];
            conv_forward(self.data(x), self.data(w), bias, dims, &mut out);
            Tensor::from_vec(out, [xs[0], out_f, xs[2]])?
        } else {
            let (xd, wd) = (self.data(x), self.data(w));
            let mut out = vec![S::zero(); xs[0] * out_f];
            for r in 0..xs[0] {
                let xrow = &xd[r * in_f..(r + 1) * in_f];
                for o in 0..out_f {
                    let bo = bias.map_or(S::zero(), |b| b[o]);
                    out[r * out_f + o] = dot(xrow, &wd[o * in_f..(o + 1) * in_f]) + bo;
                }
            }
            Tensor::from_vec(out, [xs[0], out_f])?
        };
        let mut inputs = vec![x, w];
        inputs.extend(b);
        Ok(self.push(value, Op::Linear { x, w, b }, &inputs))
    }
}

pub(super) fn matmul_backward<S: Scalar>(a: Var, b: Var, gout: &[S], sink: &mut GradSink<'_, S>) {
    let av = sink.value(a);
    let bv = sink.value(b);
    let (m, p, q) = (av.shape()[0], av.shape()[1], bv.shape()[1]);
    if sink.wants(a) {
        let ga = sink.slot(a);
        for r in 0..m {
            for k in 0..p {
                ga[r * p + k] += dot(&gout[r * q..(r + 1) * q], &bv.data()[k * q..(k + 1) * q]);
            }
        }
    }
    if sink.wants(b) {
        let gb = sink.slot(b);
        for r in 0..m {
            for k in 0..p {
                axpy(av.data()[r * p + k], &gout[r * q..(r + 1) * q], &mut gb[k * q..(k + 1) * q]);
            }
        }
    }
}

pub(super) fn linear_backward<S: Scalar>(
    x: Var,
    w: Var,
    b: Option<Var>,
    gout: &[S],
    sink: &mut GradSink<'_, S>,
) {
    let xv = sink.value(x);
    let wv = sink.value(w);
    let (out_f, in_f) = (wv.shape()[0], wv.shape()[1]);
    let batch = xv.shape()[0];
    let len = if xv.rank() == 3 { xv.shape()[2] } else { 1 };
    let dims = ConvDims {
        batch,
        in_ch: in_f,
        out_ch: out_f,
        kernel: 1,
        len,
        dilation: 1,
    };
    if xv.rank() == 3 {
        if sink.wants(w) {
            conv_backward(xv.data(), wv.data(), gout, dims, None, Some(sink.slot(w)), None);
        }
        if let Some(b) = b.filter(|&b| sink.wants(b)) {
            conv_backward(xv.data(), wv.data(), gout, dims, None, None, Some(sink.slot(b)));
        }
        if sink.wants(x) {
            conv_backward(xv.data(), wv.data(), gout, dims, Some(sink.slot(x)), None, None);
        }
        return;
    }
    let (xd, wd) = (xv.data(), wv.data());
    if sink.wants(w) {
        let gw = sink.slot(w);
        for r in 0..batch {
            let xrow = &xd[r * in_f..(r + 1) * in_f];
            for o in 0..out_f {
                axpy(gout[r * out_f + o], xrow, &mut gw[o * in_f..(o + 1) * in_f]);
            }
        }
    }
    if let Some(b) = b.filter(|&b| sink.wants(b)) {
        let gb = sink.slot(b);
        for r in 0..batch {
            for o in 0..out_f {
                gb[o] += gout[r * out_f + o];
            }
        }
    }
    if sink.wants(x) {
        let gx = sink.slot(x);
        for r in 0..batch {
            let gxrow = &mut gx[r * in_f..(r + 1) * in_f];
            for o in 0..out_f {
                axpy(gout[r * out_f + o], &wd[o * in_f..(o + 1) * in_f], gxrow);
            }
        }
    }
}
