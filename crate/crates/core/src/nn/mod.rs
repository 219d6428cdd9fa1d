//! Network layers: TCN blocks, recurrent cells, heads and parameter storage.

pub mod init;
mod model;
mod params;
mod rnn;
mod spec;
mod tcn;

pub use model::{one_hot, BodySpec, InputEncoding, ModelInput, ModelSpec, Readout, SequenceModel};
pub use params::{Bound, ModelParams, ParamId};
pub use rnn::{Rnn, RnnLayer, RnnState};
pub use spec::{levels_to_cover, receptive_field, CellKind, RnnSpec, TcnSpec, CONVS_PER_BLOCK};
pub use tcn::{ConvParams, TemporalBlock, Tcn};

/// Exact number of scalar parameters.
pub fn param_count<S: crate::Scalar>(params: &ModelParams<S>) -> usize {
    params.param_count()
}
