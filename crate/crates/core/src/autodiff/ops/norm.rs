use crate::autodiff::tape::{GradSink, Op, Tape, Var};
use crate::error::{Error, Result};
use crate::scalar::{dot, Scalar};
use crate::tensor::Tensor;

/// Directions shorter than this cannot be normalised reliably.
pub const MIN_DIRECTION_NORM: f64 = 1e-12;

impl<S: Scalar> Tape<S> {
    /// Weight normalisation `w[o] = g[o] · v[o] / ‖v[o]‖`, one norm per
    /// output channel (leading axis of `v`).
    pub fn weight_norm(&mut self, v: Var, g: Var) -> Result<Var> {
        let vs = self.shape(v);
        if vs.is_empty() || self.shape(g) != [vs[0]] {
            return Err(Error::shape(format!(
                "weight norm of v {vs:?} with g {:?}",
                self.shape(g)
            )));
        }
        let out_ch = vs[0];
        let vd = self.data(v);
        let gd = self.data(g);
        let row = vd.len() / out_ch.max(1);
        let mut norms = Vec::with_capacity(out_ch);
        let mut w = Vec::with_capacity(vd.len());
        for (o, chunk) in vd.chunks(row.max(1)).enumerate() {
            let n = dot(chunk, chunk).sqrt();
            if !(n.as_f64() >= MIN_DIRECTION_NORM) {
                return Err(Error::SingularDirection {
                    channel: o,
                    norm: n.as_f64(),
                });
            }
            let s = gd[o] / n;
            w.extend(chunk.iter().map(|&x| x * s));
            norms.push(n);
        }
        let value = Tensor::from_vec(w, vs.to_vec())?;
        Ok(self.push(value, Op::WeightNorm { v, g, norms }, &[v, g]))
    }
}

pub(super) fn weight_norm_backward<S: Scalar>(
    v: Var,
    g: Var,
    norms: &[S],
    _out: &Tensor<S>,
    gout: &[S],
    sink: &mut GradSink<'_, S>,
) {
    let vd = sink.value(v).data();
    let gd = sink.value(g).data();
    let out_ch = norms.len();
    let row = vd.len() / out_ch.max(1);
    // Projection of the upstream gradient onto each unit direction.
    let proj: Vec<S> = (0..out_ch)
        .map(|o| dot(&gout[o * row..(o + 1) * row], &vd[o * row..(o + 1) * row]) / norms[o])
        .collect();
    if sink.wants(g) {
        let gg = sink.slot(g);
        for o in 0..out_ch {
            gg[o] += proj[o];
        }
    }
    if sink.wants(v) {
        let gv = sink.slot(v);
        for o in 0..out_ch {
            let n = norms[o];
            let scale = gd[o] / n;
            let r = o * row..(o + 1) * row;
            for ((gvi, &d), &x) in gv[r.clone()].iter_mut().zip(&gout[r.clone()]).zip(&vd[r]) {
                *gvi += scale * (d - proj[o] * x / n);
            }
        }
    }
}
