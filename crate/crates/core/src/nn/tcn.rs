//! Residual temporal blocks and the stacked TCN.

use rand::Rng;

use crate::autodiff::{Tape, Var};
use crate::error::Result;
use crate::scalar::Scalar;

use super::init::{normal, INITIAL_FILTER_NORM, WEIGHT_STD};
use super::params::{Bound, ModelParams, ParamId};
use super::spec::TcnSpec;
use crate::tensor::Tensor;

/// Weight-normalised convolution: direction `v`, magnitude `g`, bias `b`.
#[derive(Clone, Copy, Debug)]
pub struct ConvParams {
    pub v: ParamId,
    pub g: ParamId,
    pub b: ParamId,
}

impl ConvParams {
    fn build<S: Scalar, R: Rng + ?Sized>(
        params: &mut ModelParams<S>,
        name: &str,
        out_ch: usize,
        in_ch: usize,
        kernel: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let v = normal::<S, _>(&[out_ch, in_ch, kernel], WEIGHT_STD, rng);
        let g = Tensor::full([out_ch], S::from_f64(INITIAL_FILTER_NORM));
        Ok(Self {
            v: params.add(format!("{name}.v"), v)?,
            g: params.add(format!("{name}.g"), g)?,
            b: params.add(format!("{name}.b"), Tensor::zeros([out_ch]))?,
        })
    }

    fn apply<S: Scalar>(&self, tape: &mut Tape<S>, bound: &Bound, x: Var, dilation: usize) -> Result<Var> {
        let w = tape.weight_norm(bound.get(self.v), bound.get(self.g))?;
        tape.conv1d_causal(x, w, Some(bound.get(self.b)), dilation)
    }
}

/// One residual block: two dilated causal conv stages plus a skip path.
#[derive(Clone, Debug)]
pub struct TemporalBlock {
    pub conv1: ConvParams,
    pub conv2: ConvParams,
    /// Sigmoid-gate convolutions, present in the gated (GLU) variant.
    pub gate1: Option<ConvParams>,
    pub gate2: Option<ConvParams>,
    /// 1×1 projection `(w [out, in, 1], b)` when the widths differ.
    pub downsample: Option<(ParamId, ParamId)>,
    pub in_ch: usize,
    pub out_ch: usize,
    pub dilation: usize,
    pub dropout: f64,
    pub use_residual: bool,
}

impl TemporalBlock {
    #[allow(clippy::too_many_arguments)]
    pub fn build<S: Scalar, R: Rng + ?Sized>(
        params: &mut ModelParams<S>,
        name: &str,
        in_ch: usize,
        out_ch: usize,
        spec: &TcnSpec,
        dilation: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let k = spec.kernel_size;
        let conv1 = ConvParams::build(params, &format!("{name}.conv1"), out_ch, in_ch, k, rng)?;
        let gate1 = if spec.use_gating {
            Some(ConvParams::build(params, &format!("{name}.gate1"), out_ch, in_ch, k, rng)?)
        } else {
            None
        };
        let conv2 = ConvParams::build(params, &format!("{name}.conv2"), out_ch, out_ch, k, rng)?;
        let gate2 = if spec.use_gating {
            Some(ConvParams::build(params, &format!("{name}.gate2"), out_ch, out_ch, k, rng)?)
        } else {
            None
        };
        let downsample = if spec.use_residual && in_ch != out_ch {
            let w = params.add(
                format!("{name}.downsample.w"),
                normal::<S, _>(&[out_ch, in_ch, 1], WEIGHT_STD, rng),
            )?;
            let b = params.add(format!("{name}.downsample.b"), Tensor::zeros([out_ch]))?;
            Some((w, b))
        } else {
            None
        };
        Ok(Self {
            conv1,
            conv2,
            gate1,
            gate2,
            downsample,
            in_ch,
            out_ch,
            dilation,
            dropout: spec.dropout,
            use_residual: spec.use_residual,
        })
    }

    /// Conv → (ReLU | A∘σ(B)) → spatial dropout.
    fn stage<S: Scalar, R: Rng + ?Sized>(
        &self,
        tape: &mut Tape<S>,
        bound: &Bound,
        x: Var,
        conv: &ConvParams,
        gate: Option<&ConvParams>,
        training: bool,
        rng: &mut R,
    ) -> Result<Var> {
        let a = conv.apply(tape, bound, x, self.dilation)?;
        let act = match gate {
            Some(gate) => {
                let b = gate.apply(tape, bound, x, self.dilation)?;
                let s = tape.sigmoid(b);
                tape.mul(a, s)?
            }
            None => tape.relu(a),
        };
        tape.channel_dropout(act, self.dropout, training, rng)
    }

    /// `x [batch, in_ch, T] -> [batch, out_ch, T]`, computing
    /// `ReLU(skip(x) + F(x))` (or `ReLU(F(x))` without the residual path).
    pub fn forward<S: Scalar, R: Rng + ?Sized>(
        &self,
        tape: &mut Tape<S>,
        bound: &Bound,
        x: Var,
        training: bool,
        rng: &mut R,
    ) -> Result<Var> {
        let h = self.stage(tape, bound, x, &self.conv1, self.gate1.as_ref(), training, rng)?;
        let h = self.stage(tape, bound, h, &self.conv2, self.gate2.as_ref(), training, rng)?;
        if !self.use_residual {
            return Ok(tape.relu(h));
        }
        let skip = match self.downsample {
            Some((w, b)) => tape.conv1d_causal(x, bound.get(w), Some(bound.get(b)), 1)?,
            None => x,
        };
        let sum = tape.add(h, skip)?;
        Ok(tape.relu(sum))
    }
}

/// Stack of temporal blocks with dilation `base^i` at level `i`.
#[derive(Clone, Debug)]
pub struct Tcn {
    pub spec: TcnSpec,
    pub blocks: Vec<TemporalBlock>,
}

impl Tcn {
    pub fn build<S: Scalar, R: Rng + ?Sized>(
        spec: &TcnSpec,
        params: &mut ModelParams<S>,
        prefix: &str,
        rng: &mut R,
    ) -> Result<Self> {
        spec.validate()?;
        let mut blocks = Vec::with_capacity(spec.levels());
        let mut in_ch = spec.input_ch;
        for (i, (&out_ch, dilation)) in spec.level_channels.iter().zip(spec.dilations()).enumerate() {
            let name = format!("{prefix}block{i}");
            blocks.push(TemporalBlock::build(params, &name, in_ch, out_ch, spec, dilation, rng)?);
            in_ch = out_ch;
        }
        Ok(Self {
            spec: spec.clone(),
            blocks,
        })
    }

    pub fn forward<S: Scalar, R: Rng + ?Sized>(
        &self,
        tape: &mut Tape<S>,
        bound: &Bound,
        x: Var,
        training: bool,
        rng: &mut R,
    ) -> Result<Var> {
        self.blocks
            .iter()
            .try_fold(x, |h, block| block.forward(tape, bound, h, training, rng))
    }
}
