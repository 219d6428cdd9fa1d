use crate::error::{Error, Result};

/// Dilated causal convolutions per residual block.
pub const CONVS_PER_BLOCK: usize = 2;

/// Architecture of a temporal convolutional network.
#[derive(Clone, Debug, PartialEq)]
pub struct TcnSpec {
    pub input_ch: usize,
    /// Hidden width of each level; its length is the number of levels `n`.
    pub level_channels: Vec<usize>,
    pub kernel_size: usize,
    pub dropout: f64,
    pub use_residual: bool,
    pub use_gating: bool,
    pub dilation_base: usize,
}

impl TcnSpec {
    /// `levels` blocks of equal width `hidden`, dilation base 2.
    pub fn uniform(input_ch: usize, hidden: usize, levels: usize, kernel_size: usize, dropout: f64) -> Self {
        Self {
            input_ch,
            level_channels: vec![hidden; levels],
            kernel_size,
            dropout,
            use_residual: true,
            use_gating: false,
            dilation_base: 2,
        }
    }

    pub fn levels(&self) -> usize {
        self.level_channels.len()
    }

    pub fn output_ch(&self) -> usize {
        self.level_channels.last().copied().unwrap_or(self.input_ch)
    }

    /// Dilation of level `i` is `dilation_base^i`.
    pub fn dilations(&self) -> Vec<usize> {
        (0..self.levels()).map(|i| self.dilation_base.pow(i as u32)).collect()
    }

    pub fn receptive_field(&self) -> usize {
        receptive_field(self.kernel_size, self.levels(), self.dilation_base)
    }

    pub fn validate(&self) -> Result<()> {
        if self.kernel_size == 0 {
            return Err(Error::Config("kernel size must be at least 1".into()));
        }
        if self.level_channels.is_empty() {
            return Err(Error::Config("a TCN needs at least one level".into()));
        }
        if self.input_ch == 0 || self.level_channels.contains(&0) {
            return Err(Error::Config("channel widths must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        if self.dilation_base == 0 {
            return Err(Error::Config("dilation base must be at least 1".into()));
        }
        Ok(())
    }
}

/// Number of input steps that can influence one output:
/// `1 + CONVS_PER_BLOCK · (k − 1) · Σ_{i<n} base^i`.
pub fn receptive_field(kernel_size: usize, levels: usize, dilation_base: usize) -> usize {
    let span: usize = (0..levels).map(|i| dilation_base.pow(i as u32)).sum();
    1 + CONVS_PER_BLOCK * kernel_size.saturating_sub(1) * span
}

/// Smallest level count whose receptive field reaches `target`, if any
/// within `max_levels`.
pub fn levels_to_cover(kernel_size: usize, dilation_base: usize, target: usize, max_levels: usize) -> Option<usize> {
    (1..=max_levels).find(|&n| receptive_field(kernel_size, n, dilation_base) >= target)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CellKind {
    Lstm,
    Gru,
    Vanilla,
}

impl CellKind {
    /// Stacked gate pre-activations per hidden unit.
    pub fn gates(self) -> usize {
        match self {
            CellKind::Lstm => 4,
            CellKind::Gru => 3,
            CellKind::Vanilla => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CellKind::Lstm => "lstm",
            CellKind::Gru => "gru",
            CellKind::Vanilla => "rnn",
        }
    }
}

/// Architecture of a stacked recurrent baseline.
#[derive(Clone, Debug, PartialEq)]
pub struct RnnSpec {
    pub cell: CellKind,
    pub input_ch: usize,
    pub hidden_size: usize,
    pub num_layers: usize,
    pub dropout: f64,
    /// Initial forget-gate bias; only used by LSTM cells.
    pub forget_bias: f64,
}

impl RnnSpec {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_size == 0 || self.num_layers == 0 || self.input_ch == 0 {
            return Err(Error::Config("RNN sizes must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn receptive_field_closed_form() {
        for n in 1..6 {
            assert_eq!(receptive_field(1, n, 2), 1);
        }
        assert_eq!(receptive_field(3, 2, 2), 13);
        assert_eq!(receptive_field(8, 8, 2), 3571);
        assert!(receptive_field(8, 8, 2) >= 1020);
        assert_eq!(receptive_field(3, 8, 2), 1021);
        for k in 1..9 {
            for n in 1..9 {
                assert_eq!(receptive_field(k, n, 2), 1 + 2 * (k - 1) * ((1 << n) - 1));
            }
        }
    }

    #[test]
    fn levels_to_cover_sequential_mnist() {
        assert_eq!(levels_to_cover(3, 2, 784, 32), Some(8));
        assert_eq!(levels_to_cover(1, 2, 2, 32), None);
    }

    #[test]
    fn dilations_grow_geometrically() {
        let spec = TcnSpec::uniform(1, 4, 5, 3, 0.0);
        assert_eq!(spec.dilations(), vec![1, 2, 4, 8, 16]);
    }

    #[test]
    fn validate_rejects_bad_dropout() {
        let mut spec = TcnSpec::uniform(1, 4, 2, 3, 0.0);
        spec.dropout = 1.0;
        assert!(spec.validate().is_err());
    }
}
