use crate::autodiff::tape::{GradSink, Op, Tape, Var};
use crate::error::{Error, Result};
use crate::scalar::{axpy, dot, Scalar};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug)]
pub(crate) struct ConvDims {
    pub batch: usize,
    pub in_ch: usize,
    pub out_ch: usize,
    pub kernel: usize,
    pub len: usize,
    pub dilation: usize,
}

/// Tap `j` of a filter reads `x[t - j * dilation]`; taps that fall before the
/// start of the sequence read the implicit left zero padding and are skipped.
pub(crate) fn conv_forward<S: Scalar>(x: &[S], w: &[S], b: Option<&[S]>, dims: ConvDims, out: &mut [S]) {
    let ConvDims {
        batch,
        in_ch,
        out_ch,
        kernel,
        len,
        dilation,
    } = dims;
    for bi in 0..batch {
        let xb = &x[bi * in_ch * len..(bi + 1) * in_ch * len];
        for o in 0..out_ch {
            let row = &mut out[(bi * out_ch + o) * len..(bi * out_ch + o + 1) * len];
            row.fill(b.map_or(S::zero(), |b| b[o]));
            for i in 0..in_ch {
                let xrow = &xb[i * len..(i + 1) * len];
                let wrow = &w[(o * in_ch + i) * kernel..(o * in_ch + i + 1) * kernel];
                for (j, &wv) in wrow.iter().enumerate() {
                    let shift = j * dilation;
                    if shift >= len {
                        break;
                    }
                    axpy(wv, &xrow[..len - shift], &mut row[shift..]);
                }
            }
        }
    }
}

pub(crate) fn conv_backward<S: Scalar>(
    x: &[S],
    w: &[S],
    gout: &[S],
    dims: ConvDims,
    mut gx: Option<&mut [S]>,
    mut gw: Option<&mut [S]>,
    mut gb: Option<&mut [S]>,
) {
    let ConvDims {
        batch,
        in_ch,
        out_ch,
        kernel,
        len,
        dilation,
    } = dims;
    for bi in 0..batch {
        for o in 0..out_ch {
            let grow = &gout[(bi * out_ch + o) * len..(bi * out_ch + o + 1) * len];
            if let Some(gb) = gb.as_deref_mut() {
                gb[o] += grow.iter().copied().sum::<S>();
            }
            for i in 0..in_ch {
                let xoff = (bi * in_ch + i) * len;
                let woff = (o * in_ch + i) * kernel;
                for j in 0..kernel {
                    let shift = j * dilation;
                    if shift >= len {
                        break;
                    }
                    if let Some(gw) = gw.as_deref_mut() {
                        gw[woff + j] += dot(&grow[shift..], &x[xoff..xoff + len - shift]);
                    }
                    if let Some(gx) = gx.as_deref_mut() {
                        axpy(w[woff + j], &grow[shift..], &mut gx[xoff..xoff + len - shift]);
                    }
                }
            }
        }
    }
}

impl<S: Scalar> Tape<S> {
    /// Dilated causal 1-D convolution.
    ///
    /// `x: [batch, in_ch, T]`, `w: [out_ch, in_ch, k]`, `b: [out_ch]`; the
    /// output has the same length `T` as the input and position `s` sees
    /// only `x[s], x[s - d], ..., x[s - (k - 1) d]`.
    pub fn conv1d_causal(&mut self, x: Var, w: Var, b: Option<Var>, dilation: usize) -> Result<Var> {
        if dilation == 0 {
            return Err(Error::domain("dilation must be at least 1"));
        }
        let xs = self.shape(x);
        let ws = self.shape(w);
        if xs.len() != 3 || ws.len() != 3 {
            return Err(Error::shape(format!(
                "conv1d expects x [batch, in_ch, T] and w [out_ch, in_ch, k], got {xs:?} and {ws:?}"
            )));
        }
        if xs[1] != ws[1] {
            return Err(Error::shape(format!(
                "conv1d: input has {} channels but filter expects {}",
                xs[1], ws[1]
            )));
        }
        if ws[2] == 0 {
            return Err(Error::domain("kernel size must be at least 1"));
        }
        let dims = ConvDims {
            batch: xs[0],
            in_ch: xs[1],
            out_ch: ws[0],
            kernel: ws[2],
            len: xs[2],
            dilation,
        };
        if let Some(b) = b {
            if self.shape(b) != [dims.out_ch] {
                return Err(Error::shape(format!(
                    "conv1d bias shape {:?}, expected [{}]",
                    self.shape(b),
                    dims.out_ch
                )));
            }
        }
        let mut out = vec![S::zero(); dims.batch * dims.out_ch * dims.len];
        conv_forward(self.data(x), self.data(w), b.map(|b| self.data(b)), dims, &mut out);
        let value = Tensor::from_vec(out, [dims.batch, dims.out_ch, dims.len])?;
        let mut inputs = vec![x, w];
        inputs.extend(b);
        Ok(self.push(value, Op::Conv1d { x, w, b, dilation }, &inputs))
    }
}

pub(super) fn conv1d_backward<S: Scalar>(
    x: Var,
    w: Var,
    b: Option<Var>,
    dilation: usize,
    gout: &[S],
    sink: &mut GradSink<'_, S>,
) {
    let xv = sink.value(x);
    let wv = sink.value(w);
    let dims = ConvDims {
        batch: xv.shape()[0],
        in_ch: xv.shape()[1],
        out_ch: wv.shape()[0],
        kernel: wv.shape()[2],
        len: xv.shape()[2],
        dilation,
    };
    // Each input gets its own pass so the mutable slots never alias.
    if sink.wants(w) {
        conv_backward(xv.data(), wv.data(), gout, dims, None, Some(sink.slot(w)), None);
    }
    if let Some(b) = b.filter(|&b| sink.wants(b)) {
        let gb = sink.slot(b);
        let len = dims.len;
        for bi in 0..dims.batch {
            for (o, g) in gb.iter_mut().enumerate() {
                *g += gout[(bi * dims.out_ch + o) * len..(bi * dims.out_ch + o + 1) * len]
                    .iter()
                    .copied()
                    .sum::<S>();
            }
        }
    }
    if sink.wants(x) {
        conv_backward(xv.data(), wv.data(), gout, dims, Some(sink.slot(x)), None, None);
    }
}
