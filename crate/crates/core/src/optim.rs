//! Parameter update rules and plateau-based learning-rate annealing.

use crate::error::{Error, Result};
use crate::nn::ModelParams;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OptimizerKind {
    Adam,
    Sgd,
    RmsProp,
}

impl OptimizerKind {
    pub fn name(self) -> &'static str {
        match self {
            OptimizerKind::Adam => "adam",
            OptimizerKind::Sgd => "sgd",
            OptimizerKind::RmsProp => "rmsprop",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "adam" => Some(OptimizerKind::Adam),
            "sgd" => Some(OptimizerKind::Sgd),
            "rmsprop" => Some(OptimizerKind::RmsProp),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    /// RMSprop smoothing constant.
    pub alpha: f64,
    pub eps: f64,
    pub momentum: f64,
    pub weight_decay: f64,
}

impl OptimizerConfig {
    pub fn new(kind: OptimizerKind, lr: f64) -> Self {
        Self {
            kind,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            alpha: 0.99,
            eps: 1e-8,
            momentum: 0.0,
            weight_decay: 0.0,
        }
    }
}

/// Moment buffers and step counter for one parameter collection.
#[derive(Clone, Debug)]
pub struct Optimizer<S> {
    pub config: OptimizerConfig,
    step: u64,
    /// Adam first moment, SGD momentum buffer.
    first: Vec<Vec<S>>,
    /// Adam second moment, RMSprop mean square.
    second: Vec<Vec<S>>,
}

impl<S: Scalar> Optimizer<S> {
    pub fn new(config: OptimizerConfig, params: &ModelParams<S>) -> Self {
        let zeros = || params.tensors().iter().map(|t| vec![S::zero(); t.len()]).collect();
        Self {
            config,
            step: 0,
            first: zeros(),
            second: zeros(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn lr(&self) -> f64 {
        self.config.lr
    }

    pub fn set_lr(&mut self, lr: f64) {
        self.config.lr = lr;
    }

    /// Buffers as `(name, data)` pairs for checkpointing. Names are relative
    /// to the parameter index.
    pub fn state_buffers(&self) -> Vec<(String, &[S])> {
        let mut out = Vec::new();
        for (i, b) in self.first.iter().enumerate() {
            out.push((format!("first.{i}"), b.as_slice()));
        }
        for (i, b) in self.second.iter().enumerate() {
            out.push((format!("second.{i}"), b.as_slice()));
        }
        out
    }

    pub fn restore(&mut self, step: u64, buffers: Vec<Vec<S>>) -> Result<()> {
        let n = self.first.len();
        if buffers.len() != 2 * n {
            return Err(Error::Checkpoint(format!(
                "optimizer state has {} buffers, expected {}",
                buffers.len(),
                2 * n
            )));
        }
        let mut it = buffers.into_iter();
        for slot in self.first.iter_mut().chain(self.second.iter_mut()) {
            let b = it.next().expect("counted");
            if b.len() != slot.len() {
                return Err(Error::Checkpoint("optimizer buffer length mismatch".into()));
            }
            *slot = b;
        }
        self.step = step;
        Ok(())
    }

    /// Applies one update using the gradients stored on `params`.
    ///
    /// Refuses to touch anything if a gradient is non-finite, naming the
    /// offending parameter.
    pub fn step(&mut self, params: &mut ModelParams<S>) -> Result<()> {
        for (name, t) in params.iter() {
            if t.grad().is_some_and(|g| g.iter().any(|v| !v.is_finite())) {
                return Err(Error::NonFinite(format!("gradient of parameter {name}")));
            }
        }
        self.step += 1;
        let c = self.config;
        let lr = S::from_f64(c.lr);
        let wd = S::from_f64(c.weight_decay);
        let t = self.step as i32;
        let bc1 = S::from_f64(1.0 - c.beta1.powi(t));
        let bc2 = S::from_f64(1.0 - c.beta2.powi(t));
        let (b1, b2) = (S::from_f64(c.beta1), S::from_f64(c.beta2));
        let alpha = S::from_f64(c.alpha);
        let eps = S::from_f64(c.eps);
        let mu = S::from_f64(c.momentum);
        let one = S::one();

        for (i, tensor) in params.tensors_mut().iter_mut().enumerate() {
            let (data, grad) = tensor.data_and_grad_mut();
            let Some(grad) = grad else { continue };
            let first = &mut self.first[i];
            let second = &mut self.second[i];
            for j in 0..data.len() {
                let g = grad[j] + wd * data[j];
                match c.kind {
                    OptimizerKind::Adam => {
                        first[j] = b1 * first[j] + (one - b1) * g;
                        second[j] = b2 * second[j] + (one - b2) * g * g;
                        let m_hat = first[j] / bc1;
                        let v_hat = second[j] / bc2;
                        data[j] -= lr * m_hat / (v_hat.sqrt() + eps);
                    }
                    OptimizerKind::RmsProp => {
                        second[j] = alpha * second[j] + (one - alpha) * g * g;
                        data[j] -= lr * g / (second[j].sqrt() + eps);
                    }
                    OptimizerKind::Sgd => {
                        if c.momentum > 0.0 {
                            first[j] = mu * first[j] + g;
                            data[j] -= lr * first[j];
                        } else {
                            data[j] -= lr * g;
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// Relative improvement below which a new value counts as a plateau.
pub const PLATEAU_THRESHOLD: f64 = 1e-4;

/// Halves (by `factor`) the learning rate after `patience` evaluations
/// without relative improvement of a lower-is-better metric.
#[derive(Clone, Debug)]
pub struct PlateauScheduler {
    pub factor: f64,
    pub patience: usize,
    best: Option<f64>,
    bad_evals: usize,
}

impl PlateauScheduler {
    pub fn new(factor: f64, patience: usize) -> Self {
        Self {
            factor,
            patience,
            best: None,
            bad_evals: 0,
        }
    }

    /// Best value seen so far and evaluations since it.
    pub fn state(&self) -> (Option<f64>, usize) {
        (self.best, self.bad_evals)
    }

    pub fn restore(&mut self, best: Option<f64>, bad_evals: usize) {
        self.best = best;
        self.bad_evals = bad_evals;
    }

    /// Feeds one evaluation; returns the new learning rate if it changed.
    pub fn observe(&mut self, metric: f64, lr: f64) -> Option<f64> {
        let improved = match self.best {
            None => true,
            Some(best) => best - metric > PLATEAU_THRESHOLD * best.abs(),
        };
        if improved {
            self.best = Some(metric);
            self.bad_evals = 0;
            return None;
        }
        self.bad_evals += 1;
        if self.patience > 0 && self.bad_evals >= self.patience {
            self.bad_evals = 0;
            return Some(lr * self.factor);
        }
        None
    }
}

/// Learning rate after replaying `history` through a [`PlateauScheduler`].
pub fn anneal_on_plateau(lr: f64, history: &[f64], factor: f64, patience: usize) -> f64 {
    let mut sched = PlateauScheduler::new(factor, patience);
    history
        .iter()
        .fold(lr, |lr, &m| sched.observe(m, lr).unwrap_or(lr))
}
