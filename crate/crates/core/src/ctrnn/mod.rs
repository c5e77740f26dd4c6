//! Continuous-time recurrent network.
//!
//! Hidden units follow `tau_i * dy_i/dt = -y_i + tanh(net_i)` with
//! `net = W_rec·y + W_in·x + b_hidden`, integrated with forward Euler on a
//! mesh of `dt`-sized steps (`1/dt` steps per bar). A linear readout
//! `W_out·y + b_out` emits the predicted log-returns for the next `n_out`
//! bars.
//!
//! Training is online: predictions mature after `n_out` bars, their squared
//! error is added to a running sum, and a truncated BPTT gradient drives an
//! RMS-normalized per-weight step.

mod baseline;
mod dynamics;
mod gradient;
mod optim;
mod train;

use alloc::vec::Vec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::math::Matrix;

pub use baseline::{feedforward_baseline, window_inputs, FeedforwardConfig, FeedforwardNet};
pub use dynamics::{loss, predict, readout, step, step_into};
pub use gradient::{bptt_gradient, GradientResult};
pub use optim::online_update;
pub use train::{train_online, Matured, OnlineTrainer, RunningError, Sample, StepOutput, TrainOutcome};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NetworkError {
    #[error("invalid topology: {0}")]
    InvalidTopology(&'static str),
    #[error("invalid training config: {0}")]
    InvalidConfig(&'static str),
    #[error("dimension mismatch for {what}: expected {expected}, got {actual}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("need {needed} steps of history, have {available}")]
    InsufficientHistory { needed: usize, available: usize },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
}

pub(crate) fn check_len(what: &'static str, expected: usize, actual: usize) -> Result<(), NetworkError> {
    if expected == actual {
        Ok(())
    } else {
        Err(NetworkError::DimensionMismatch {
            what,
            expected,
            actual,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    n_in: usize,
    n_hidden: usize,
    n_out: usize,
    dt: f64,
    tau: Vec<f64>,
}

impl Topology {
    /// `dt` and `tau` are in units of one bar interval. Requires
    /// `0 < dt <= min(tau)` so each Euler step is a convex combination and
    /// activations stay in `[-1, 1]`.
    pub fn new(n_in: usize, n_hidden: usize, n_out: usize, dt: f64, tau: Vec<f64>) -> Result<Self, NetworkError> {
        if n_in == 0 || n_hidden == 0 || n_out == 0 {
            return Err(NetworkError::InvalidTopology("unit counts must be at least 1"));
        }
        check_len("tau", n_hidden, tau.len())?;
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(NetworkError::InvalidTopology("dt must be positive"));
        }
        if tau.iter().any(|&t| !(t >= dt) || !t.is_finite()) {
            return Err(NetworkError::InvalidTopology("dt must not exceed any time constant"));
        }
        Ok(Self {
            n_in,
            n_hidden,
            n_out,
            dt,
            tau,
        })
    }

    pub fn uniform(n_in: usize, n_hidden: usize, n_out: usize, dt: f64, tau: f64) -> Result<Self, NetworkError> {
        Self::new(n_in, n_hidden, n_out, dt, alloc::vec![tau; n_hidden])
    }

    pub fn n_in(&self) -> usize {
        self.n_in
    }

    pub fn n_hidden(&self) -> usize {
        self.n_hidden
    }

    pub fn n_out(&self) -> usize {
        self.n_out
    }

    /// Prediction horizon in bars.
    pub fn horizon(&self) -> usize {
        self.n_out
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn tau(&self) -> &[f64] {
        &self.tau
    }

    /// Same network with a different mesh step.
    pub fn with_dt(&self, dt: f64) -> Result<Self, NetworkError> {
        Self::new(self.n_in, self.n_hidden, self.n_out, dt, self.tau.clone())
    }

    /// Number of Euler steps per bar; `1/dt` must be a whole number.
    pub fn substeps_per_bar(&self) -> Result<usize, NetworkError> {
        let n = libm::round(1.0 / self.dt);
        if n < 1.0 || libm::fabs(n * self.dt - 1.0) > 1e-9 {
            return Err(NetworkError::InvalidTopology("1/dt must be a whole number of steps per bar"));
        }
        Ok(n as usize)
    }
}

/// All trainable parameters. The same shape doubles as a gradient and as
/// per-weight optimizer statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct Weights {
    pub w_in: Matrix,
    pub w_rec: Matrix,
    pub w_out: Matrix,
    pub b_hidden: Vec<f64>,
    pub b_out: Vec<f64>,
}

impl Weights {
    pub fn zeros(topo: &Topology) -> Self {
        Self {
            w_in: Matrix::zeros(topo.n_hidden, topo.n_in),
            w_rec: Matrix::zeros(topo.n_hidden, topo.n_hidden),
            w_out: Matrix::zeros(topo.n_out, topo.n_hidden),
            b_hidden: alloc::vec![0.0; topo.n_hidden],
            b_out: alloc::vec![0.0; topo.n_out],
        }
    }

    /// Matrix entries uniform in `[-s, s]` with `s = 1/sqrt(fan_in)` of that
    /// matrix; biases start at zero.
    pub fn init(topo: &Topology, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut w = Self::zeros(topo);
        for m in [&mut w.w_in, &mut w.w_rec, &mut w.w_out] {
            let s = 1.0 / libm::sqrt(m.cols() as f64);
            for v in m.as_mut_slice() {
                *v = rng.gen_range(-s..=s);
            }
        }
        w
    }

    pub fn matches(&self, topo: &Topology) -> bool {
        self.w_in.rows() == topo.n_hidden
            && self.w_in.cols() == topo.n_in
            && self.w_rec.rows() == topo.n_hidden
            && self.w_rec.cols() == topo.n_hidden
            && self.w_out.rows() == topo.n_out
            && self.w_out.cols() == topo.n_hidden
            && self.b_hidden.len() == topo.n_hidden
            && self.b_out.len() == topo.n_out
    }

    pub fn slices(&self) -> [&[f64]; 5] {
        [
            self.w_in.as_slice(),
            self.w_rec.as_slice(),
            self.w_out.as_slice(),
            &self.b_hidden,
            &self.b_out,
        ]
    }

    pub fn slices_mut(&mut self) -> [&mut [f64]; 5] {
        [
            self.w_in.as_mut_slice(),
            self.w_rec.as_mut_slice(),
            self.w_out.as_mut_slice(),
            &mut self.b_hidden,
            &mut self.b_out,
        ]
    }

    pub fn param_count(&self) -> usize {
        self.slices().iter().map(|s| s.len()).sum()
    }

    /// Concatenation of the fields in declaration order.
    pub fn flatten(&self) -> Vec<f64> {
        self.slices().iter().flat_map(|s| s.iter().copied()).collect()
    }

    /// Inverse of [`Weights::flatten`].
    pub fn from_flat(topo: &Topology, flat: &[f64]) -> Result<Self, NetworkError> {
        let mut w = Self::zeros(topo);
        check_len("flat weights", w.param_count(), flat.len())?;
        let mut rest = flat;
        for s in w.slices_mut() {
            let (head, tail) = rest.split_at(s.len());
            s.copy_from_slice(head);
            rest = tail;
        }
        Ok(w)
    }

    pub fn is_finite(&self) -> bool {
        self.slices().iter().all(|s| s.iter().all(|v| v.is_finite()))
    }
}

/// Hidden activations.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkState {
    pub y: Vec<f64>,
}

impl NetworkState {
    pub fn zeros(topo: &Topology) -> Self {
        Self {
            y: alloc::vec![0.0; topo.n_hidden],
        }
    }

    pub fn is_bounded(&self) -> bool {
        self.y.iter().all(|v| (-1.0..=1.0).contains(v))
    }
}

/// Predicted log-returns for the `horizon` bars following `origin`.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub origin: crate::market_data::Timestamp,
    pub values: Vec<f64>,
}

impl Prediction {
    pub fn horizon(&self) -> usize {
        self.values.len()
    }

    /// Sum of the predicted per-bar log-returns.
    pub fn cumulative_return(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Price path implied by compounding the predicted returns from `last_close`.
    pub fn price_path(&self, last_close: f64) -> Vec<f64> {
        let mut acc = 0.0;
        self.values
            .iter()
            .map(|r| {
                acc += r;
                last_close * libm::exp(acc)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Truncation depth in mesh steps.
    pub truncation_depth: usize,
    pub base_rate: f64,
    pub adapt_decay: f64,
    pub epsilon: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            truncation_depth: 20,
            base_rate: 1e-3,
            adapt_decay: 0.99,
            epsilon: 1e-8,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), NetworkError> {
        if self.truncation_depth == 0 {
            return Err(NetworkError::InvalidConfig("truncation depth must be at least 1"));
        }
        if !(self.base_rate > 0.0) || !self.base_rate.is_finite() {
            return Err(NetworkError::InvalidConfig("base_rate must be positive"));
        }
        if !(self.adapt_decay > 0.0 && self.adapt_decay < 1.0) {
            return Err(NetworkError::InvalidConfig("adapt_decay must lie in (0, 1)"));
        }
        if !(self.epsilon >= 0.0) {
            return Err(NetworkError::InvalidConfig("epsilon must be non-negative"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn topology_validation() {
        assert!(Topology::uniform(0, 3, 2, 0.5, 1.0).is_err());
        assert!(Topology::uniform(1, 3, 2, 1.5, 1.0).is_err());
        assert!(Topology::uniform(1, 3, 2, 0.0, 1.0).is_err());
        assert!(Topology::new(1, 3, 2, 0.5, alloc::vec![1.0, 1.0]).is_err());
        let t = Topology::uniform(2, 3, 10, 0.5, 1.0).unwrap();
        assert_eq!(t.horizon(), 10);
        assert_eq!(t.substeps_per_bar().unwrap(), 2);
        assert!(Topology::uniform(2, 3, 10, 0.3, 1.0).unwrap().substeps_per_bar().is_err());
    }

    #[test]
    fn init_is_deterministic_and_bounded() {
        let t = Topology::uniform(1, 1, 1, 0.5, 1.0).unwrap();
        let a = Weights::init(&t, 7);
        assert_eq!(a, Weights::init(&t, 7));
        assert!(a.flatten().iter().all(|v| v.abs() <= 1.0));
        assert_ne!(a, Weights::init(&t, 8));
    }

    #[test]
    fn init_mean_is_near_zero() {
        let t = Topology::uniform(64, 64, 64, 0.5, 1.0).unwrap();
        let w = Weights::init(&t, 3);
        for m in [&w.w_in, &w.w_rec, &w.w_out] {
            let s = 1.0 / libm::sqrt(m.cols() as f64);
            let n = m.as_slice().len() as f64;
            let mean = m.as_slice().iter().sum::<f64>() / n;
            assert!(mean.abs() <= 3.0 * s / libm::sqrt(n), "mean {mean}");
            assert!(m.as_slice().iter().all(|v| v.abs() <= s));
        }
    }

    #[test]
    fn flatten_round_trip() {
        let t = Topology::uniform(3, 4, 5, 0.5, 1.0).unwrap();
        let w = Weights::init(&t, 11);
        assert_eq!(Weights::from_flat(&t, &w.flatten()).unwrap(), w);
        assert!(Weights::from_flat(&t, &[0.0; 3]).is_err());
    }

    #[test]
    fn train_config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        for bad in [
            TrainConfig {
                truncation_depth: 0,
                ..TrainConfig::default()
            },
            TrainConfig {
                base_rate: 0.0,
                ..TrainConfig::default()
            },
            TrainConfig {
                adapt_decay: 1.0,
                ..TrainConfig::default()
            },
        ] {
            assert!(bad.validate().is_err());
        }
    }
}
