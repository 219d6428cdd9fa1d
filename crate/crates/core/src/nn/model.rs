//! Full sequence models: input encoding, TCN or RNN body, output head.

use rand::Rng;

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

use super::init::{normal, WEIGHT_STD};
use super::params::{Bound, ModelParams, ParamId};
use super::rnn::Rnn;
use super::spec::{RnnSpec, TcnSpec};
use super::tcn::Tcn;

#[derive(Clone, Debug, PartialEq)]
pub enum InputEncoding {
    /// Real-valued channels fed as-is.
    Dense { channels: usize },
    /// Class indices through a learned `[vocab, dim]` table.
    Embedding { vocab: usize, dim: usize },
    /// Class indices as fixed one-hot channels.
    OneHot { vocab: usize },
}

impl InputEncoding {
    pub fn channels(&self) -> usize {
        match *self {
            InputEncoding::Dense { channels } => channels,
            InputEncoding::Embedding { dim, .. } => dim,
            InputEncoding::OneHot { vocab } => vocab,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Readout {
    /// One prediction from the final step: logits `[batch, outputs]`.
    LastStep,
    /// A prediction at every step: logits `[batch, outputs, T]`.
    PerStep,
}

#[derive(Clone, Debug, PartialEq)]
pub enum BodySpec {
    Tcn(TcnSpec),
    Rnn(RnnSpec),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelSpec {
    pub body: BodySpec,
    pub input: InputEncoding,
    pub readout: Readout,
    pub outputs: usize,
}

/// Inputs to a forward pass.
#[derive(Clone, Copy, Debug)]
pub enum ModelInput<'a, S> {
    /// `[batch, channels, T]`
    Dense(&'a Tensor<S>),
    /// Row-major `[batch, T]` class indices.
    Tokens { tokens: &'a [usize], batch: usize },
}

#[derive(Clone, Debug)]
enum Body {
    Tcn(Tcn),
    Rnn(Rnn),
}

#[derive(Clone, Debug)]
pub struct SequenceModel<S> {
    spec: ModelSpec,
    params: ModelParams<S>,
    body: Body,
    embedding: Option<ParamId>,
    head_w: ParamId,
    head_b: ParamId,
}

impl<S: Scalar> SequenceModel<S> {
    pub fn build<R: Rng + ?Sized>(spec: &ModelSpec, rng: &mut R) -> Result<Self> {
        let mut params = ModelParams::new();
        let channels = spec.input.channels();
        let embedding = match spec.input {
            InputEncoding::Embedding { vocab, dim } => {
                Some(params.add("embedding", normal::<S, _>(&[vocab, dim], WEIGHT_STD, rng))?)
            }
            _ => None,
        };
        let (body, width) = match &spec.body {
            BodySpec::Tcn(t) => {
                if t.input_ch != channels {
                    return Err(Error::Config(format!(
                        "TCN expects {} input channels but the encoding provides {channels}",
                        t.input_ch
                    )));
                }
                let tcn = Tcn::build(t, &mut params, "", rng)?;
                let w = t.output_ch();
                (Body::Tcn(tcn), w)
            }
            BodySpec::Rnn(r) => {
                if r.input_ch != channels {
                    return Err(Error::Config(format!(
                        "RNN expects {} input channels but the encoding provides {channels}",
                        r.input_ch
                    )));
                }
                (Body::Rnn(Rnn::build(r, &mut params, "", rng)?), r.hidden_size)
            }
        };
        let head_w = params.add("head.w", normal::<S, _>(&[spec.outputs, width], WEIGHT_STD, rng))?;
        let head_b = params.add("head.b", Tensor::zeros([spec.outputs]))?;
        Ok(Self {
            spec: spec.clone(),
            params,
            body,
            embedding,
            head_w,
            head_b,
        })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn params(&self) -> &ModelParams<S> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ModelParams<S> {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.param_count()
    }

    pub fn tcn(&self) -> Option<&Tcn> {
        match &self.body {
            Body::Tcn(t) => Some(t),
            Body::Rnn(_) => None,
        }
    }

    pub fn rnn(&self) -> Option<&Rnn> {
        match &self.body {
            Body::Rnn(r) => Some(r),
            Body::Tcn(_) => None,
        }
    }

    /// Encodes the input as `[batch, channels, T]` on the tape.
    pub fn encode(&self, tape: &mut Tape<S>, bound: &Bound, input: ModelInput<'_, S>) -> Result<Var> {
        match (&self.spec.input, input) {
            (InputEncoding::Dense { channels }, ModelInput::Dense(x)) => {
                if x.rank() != 3 || x.shape()[1] != *channels {
                    return Err(Error::shape(format!(
                        "dense input {:?}, expected [batch, {channels}, T]",
                        x.shape()
                    )));
                }
                Ok(tape.constant(x.clone()))
            }
            (InputEncoding::Embedding { .. }, ModelInput::Tokens { tokens, batch }) => {
                let table = bound.get(self.embedding.expect("embedding registered"));
                tape.embedding(table, tokens, batch)
            }
            (InputEncoding::OneHot { vocab }, ModelInput::Tokens { tokens, batch }) => {
                Ok(tape.constant(one_hot(tokens, batch, *vocab)?))
            }
            _ => Err(Error::Contract("input kind does not match the model's encoding".into())),
        }
    }

    /// Logits for `input`: `[batch, outputs]` or `[batch, outputs, T]`
    /// depending on the readout.
    pub fn forward<R: Rng + ?Sized>(
        &self,
        tape: &mut Tape<S>,
        bound: &Bound,
        input: ModelInput<'_, S>,
        training: bool,
        rng: &mut R,
    ) -> Result<Var> {
        let x = self.encode(tape, bound, input)?;
        let (w, b) = (bound.get(self.head_w), bound.get(self.head_b));
        match (&self.body, self.spec.readout) {
            (Body::Tcn(tcn), readout) => {
                let y = tcn.forward(tape, bound, x, training, rng)?;
                let y = match readout {
                    Readout::LastStep => tape.select_last_step(y)?,
                    Readout::PerStep => y,
                };
                tape.linear(y, w, Some(b))
            }
            (Body::Rnn(rnn), Readout::LastStep) => {
                let hs = rnn.forward(tape, bound, x, training, rng)?;
                let last = *hs.last().ok_or_else(|| Error::shape("empty input sequence"))?;
                tape.linear(last, w, Some(b))
            }
            (Body::Rnn(rnn), Readout::PerStep) => {
                let hs = rnn.forward(tape, bound, x, training, rng)?;
                let y = tape.stack_time(&hs)?;
                tape.linear(y, w, Some(b))
            }
        }
    }

    /// Same architecture and weights in another precision.
    pub fn cast<T: Scalar>(&self) -> SequenceModel<T> {
        SequenceModel {
            spec: self.spec.clone(),
            params: self.params.cast(),
            body: self.body.clone(),
            embedding: self.embedding,
            head_w: self.head_w,
            head_b: self.head_b,
        }
    }
}

/// `tokens [batch, T]` as a one-hot `[batch, vocab, T]` tensor.
pub fn one_hot<S: Scalar>(tokens: &[usize], batch: usize, vocab: usize) -> Result<Tensor<S>> {
    if batch == 0 || !tokens.len().is_multiple_of(batch) {
        return Err(Error::shape(format!("{} tokens do not split into {batch} rows", tokens.len())));
    }
    let len = tokens.len() / batch;
    let mut data = vec![S::zero(); batch * vocab * len];
    for b in 0..batch {
        for t in 0..len {
            let tok = tokens[b * len + t];
            if tok >= vocab {
                return Err(Error::domain(format!("token {tok} outside vocabulary of {vocab}")));
            }
            data[(b * vocab + tok) * len + t] = S::one();
        }
    }
    Tensor::from_vec(data, [batch, vocab, len])
}
