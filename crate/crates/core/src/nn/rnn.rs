//! LSTM, GRU and vanilla (tanh) recurrent baselines.

use rand::Rng;

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

use super::init::uniform;
use super::params::{Bound, ModelParams, ParamId};
use super::spec::{CellKind, RnnSpec};

/// Parameters of one recurrent layer. Gate blocks are stacked along the
/// leading axis: LSTM `[i, f, g, o]`, GRU `[r, z, n]`.
#[derive(Clone, Copy, Debug)]
pub struct RnnLayer {
    pub w_ih: ParamId,
    pub w_hh: ParamId,
    pub b_ih: ParamId,
    /// Hidden-side bias; GRU only, since its candidate gate scales it by `r`.
    pub b_hh: Option<ParamId>,
    pub input: usize,
}

/// Recurrent state of one layer.
#[derive(Clone, Copy, Debug)]
pub struct RnnState {
    pub h: Var,
    /// LSTM cell state.
    pub c: Option<Var>,
}

#[derive(Clone, Debug)]
pub struct Rnn {
    pub spec: RnnSpec,
    pub layers: Vec<RnnLayer>,
}

impl Rnn {
    pub fn build<S: Scalar, R: Rng + ?Sized>(
        spec: &RnnSpec,
        params: &mut ModelParams<S>,
        prefix: &str,
        rng: &mut R,
    ) -> Result<Self> {
        spec.validate()?;
        let h = spec.hidden_size;
        let rows = spec.cell.gates() * h;
        let bound = 1.0 / (h as f64).sqrt();
        let mut layers = Vec::with_capacity(spec.num_layers);
        for l in 0..spec.num_layers {
            let input = if l == 0 { spec.input_ch } else { h };
            let name = format!("{prefix}{}{l}", spec.cell.name());
            let w_ih = params.add(format!("{name}.w_ih"), uniform::<S, _>(&[rows, input], bound, rng))?;
            let w_hh = params.add(format!("{name}.w_hh"), uniform::<S, _>(&[rows, h], bound, rng))?;
            let mut b: Tensor<S> = uniform(&[rows], bound, rng);
            if spec.cell == CellKind::Lstm {
                b.data_mut()[h..2 * h].fill(S::from_f64(spec.forget_bias));
            }
            let b_ih = params.add(format!("{name}.b_ih"), b)?;
            let b_hh = if spec.cell == CellKind::Gru {
                Some(params.add(format!("{name}.b_hh"), uniform::<S, _>(&[rows], bound, rng))?)
            } else {
                None
            };
            layers.push(RnnLayer {
                w_ih,
                w_hh,
                b_ih,
                b_hh,
                input,
            });
        }
        Ok(Self {
            spec: spec.clone(),
            layers,
        })
    }

    pub fn zero_state<S: Scalar>(&self, tape: &mut Tape<S>, batch: usize) -> Vec<RnnState> {
        let h = self.spec.hidden_size;
        (0..self.layers.len())
            .map(|_| RnnState {
                h: tape.constant(Tensor::zeros([batch, h])),
                c: (self.spec.cell == CellKind::Lstm).then(|| tape.constant(Tensor::zeros([batch, h]))),
            })
            .collect()
    }

    /// One time-step update of layer `layer` with input `x_t [batch, in]`.
    pub fn cell_step<S: Scalar>(
        &self,
        tape: &mut Tape<S>,
        bound: &Bound,
        layer: usize,
        x_t: Var,
        state: RnnState,
    ) -> Result<RnnState> {
        let p = &self.layers[layer];
        let hid = self.spec.hidden_size;
        let xs = tape.shape(x_t);
        if xs.len() != 2 || xs[1] != p.input {
            return Err(Error::shape(format!("cell input {xs:?}, expected [batch, {}]", p.input)));
        }
        if tape.shape(state.h) != [xs[0], hid] {
            return Err(Error::shape(format!(
                "hidden state {:?}, expected [{}, {hid}]",
                tape.shape(state.h),
                xs[0]
            )));
        }
        let gx = tape.linear(x_t, bound.get(p.w_ih), Some(bound.get(p.b_ih)))?;
        let gh = tape.linear(state.h, bound.get(p.w_hh), p.b_hh.map(|b| bound.get(b)))?;
        match self.spec.cell {
            CellKind::Vanilla => {
                let pre = tape.add(gx, gh)?;
                Ok(RnnState {
                    h: tape.tanh(pre),
                    c: None,
                })
            }
            CellKind::Lstm => {
                let c = state.c.ok_or_else(|| Error::Contract("LSTM state without a cell".into()))?;
                let pre = tape.add(gx, gh)?;
                let i = tape.slice_cols(pre, 0, hid)?;
                let f = tape.slice_cols(pre, hid, hid)?;
                let g = tape.slice_cols(pre, 2 * hid, hid)?;
                let o = tape.slice_cols(pre, 3 * hid, hid)?;
                let (i, f, o) = (tape.sigmoid(i), tape.sigmoid(f), tape.sigmoid(o));
                let g = tape.tanh(g);
                let keep = tape.mul(f, c)?;
                let write = tape.mul(i, g)?;
                let c_new = tape.add(keep, write)?;
                let tc = tape.tanh(c_new);
                let h_new = tape.mul(o, tc)?;
                Ok(RnnState {
                    h: h_new,
                    c: Some(c_new),
                })
            }
            CellKind::Gru => {
                let slice = |tape: &mut Tape<S>, v: Var, k: usize| tape.slice_cols(v, k * hid, hid);
                let (xr, xz, xn) = (slice(tape, gx, 0)?, slice(tape, gx, 1)?, slice(tape, gx, 2)?);
                let (hr, hz, hn) = (slice(tape, gh, 0)?, slice(tape, gh, 1)?, slice(tape, gh, 2)?);
                let r = tape.add(xr, hr)?;
                let r = tape.sigmoid(r);
                let z = tape.add(xz, hz)?;
                let z = tape.sigmoid(z);
                let rn = tape.mul(r, hn)?;
                let n = tape.add(xn, rn)?;
                let n = tape.tanh(n);
                // h' = (1 − z)∘n + z∘h = n + z∘(h − n)
                let diff = tape.sub(state.h, n)?;
                let zd = tape.mul(z, diff)?;
                Ok(RnnState {
                    h: tape.add(n, zd)?,
                    c: None,
                })
            }
        }
    }

    /// Runs the stack over `x [batch, in, T]` and returns the top-layer
    /// hidden state at every step.
    pub fn forward<S: Scalar, R: Rng + ?Sized>(
        &self,
        tape: &mut Tape<S>,
        bound: &Bound,
        x: Var,
        training: bool,
        rng: &mut R,
    ) -> Result<Vec<Var>> {
        let s = tape.shape(x).to_vec();
        let [batch, _, len] = s[..] else {
            return Err(Error::shape(format!("RNN input must be [batch, ch, T], got {s:?}")));
        };
        let mut states = self.zero_state(tape, batch);
        let mut outputs = Vec::with_capacity(len);
        for t in 0..len {
            let mut input = tape.select_time(x, t)?;
            for (l, state) in states.iter_mut().enumerate() {
                if l > 0 {
                    input = tape.channel_dropout(input, self.spec.dropout, training, rng)?;
                }
                *state = self.cell_step(tape, bound, l, input, *state)?;
                input = state.h;
            }
            outputs.push(input);
        }
        Ok(outputs)
    }
}
