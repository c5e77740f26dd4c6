//! Single-hidden-layer feedforward predictor trained by batch backprop.
//! Kept as a comparison arm for the recurrent network: it sees a fixed
//! window of past features and emits the same k-vector of log-returns.

use alloc::vec;
use alloc::vec::Vec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{check_len, NetworkError, Prediction};
use crate::market_data::Timestamp;
use crate::math::Matrix;

#[derive(Debug, Clone, PartialEq)]
pub struct FeedforwardConfig {
    pub hidden: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for FeedforwardConfig {
    fn default() -> Self {
        Self {
            hidden: 16,
            learning_rate: 0.05,
            epochs: 500,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeedforwardNet {
    pub w1: Matrix,
    pub b1: Vec<f64>,
    pub w2: Matrix,
    pub b2: Vec<f64>,
}

impl FeedforwardNet {
    pub fn zeros(n_in: usize, hidden: usize, n_out: usize) -> Self {
        Self {
            w1: Matrix::zeros(hidden, n_in),
            b1: vec![0.0; hidden],
            w2: Matrix::zeros(n_out, hidden),
            b2: vec![0.0; n_out],
        }
    }

    pub fn init(n_in: usize, hidden: usize, n_out: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut net = Self::zeros(n_in, hidden, n_out);
        for m in [&mut net.w1, &mut net.w2] {
            let s = 1.0 / libm::sqrt(m.cols() as f64);
            for v in m.as_mut_slice() {
                *v = rng.gen_range(-s..=s);
            }
        }
        net
    }

    pub fn n_in(&self) -> usize {
        self.w1.cols()
    }

    pub fn n_out(&self) -> usize {
        self.w2.rows()
    }

    fn hidden(&self, x: &[f64]) -> Vec<f64> {
        let mut h = self.b1.clone();
        self.w1.mul_vec_acc(x, &mut h);
        for v in h.iter_mut() {
            *v = libm::tanh(*v);
        }
        h
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>, NetworkError> {
        check_len("input window", self.n_in(), x.len())?;
        let h = self.hidden(x);
        let mut out = self.b2.clone();
        self.w2.mul_vec_acc(&h, &mut out);
        Ok(out)
    }

    pub fn predict(&self, x: &[f64], origin: Timestamp) -> Result<Prediction, NetworkError> {
        Ok(Prediction {
            origin,
            values: self.forward(x)?,
        })
    }

    /// Mean over samples of the per-sample mean squared error.
    pub fn batch_loss(&self, inputs: &[Vec<f64>], targets: &[Vec<f64>]) -> Result<f64, NetworkError> {
        check_len("targets", inputs.len(), targets.len())?;
        if inputs.is_empty() {
            return Ok(0.0);
        }
        let mut total = 0.0;
        for (x, t) in inputs.iter().zip(targets) {
            total += super::loss(&self.forward(x)?, t)?;
        }
        Ok(total / inputs.len() as f64)
    }

    /// Batch loss and its gradient with respect to every parameter.
    pub fn loss_and_gradient(
        &self,
        inputs: &[Vec<f64>],
        targets: &[Vec<f64>],
    ) -> Result<(f64, FeedforwardNet), NetworkError> {
        check_len("targets", inputs.len(), targets.len())?;
        let mut grad = Self::zeros(self.n_in(), self.b1.len(), self.n_out());
        if inputs.is_empty() {
            return Ok((0.0, grad));
        }
        let scale = 1.0 / inputs.len() as f64;
        let k = self.n_out() as f64;
        let mut total = 0.0;
        for (x, t) in inputs.iter().zip(targets) {
            check_len("input window", self.n_in(), x.len())?;
            check_len("target", self.n_out(), t.len())?;
            let h = self.hidden(x);
            let mut out = self.b2.clone();
            self.w2.mul_vec_acc(&h, &mut out);
            let d_out: Vec<f64> = out.iter().zip(t).map(|(o, t)| 2.0 * (o - t) / k * scale).collect();
            total += out.iter().zip(t).map(|(o, t)| (o - t) * (o - t)).sum::<f64>() / k;
            grad.w2.add_outer(&d_out, &h);
            for (g, d) in grad.b2.iter_mut().zip(&d_out) {
                *g += d;
            }
            let mut d_h = vec![0.0; h.len()];
            self.w2.mul_vec_transposed_acc(&d_out, &mut d_h);
            for (d, hv) in d_h.iter_mut().zip(&h) {
                *d *= 1.0 - hv * hv;
            }
            grad.w1.add_outer(&d_h, x);
            for (g, d) in grad.b1.iter_mut().zip(&d_h) {
                *g += d;
            }
        }
        Ok((total * scale, grad))
    }

    fn params_mut(&mut self) -> [&mut [f64]; 4] {
        [self.w1.as_mut_slice(), &mut self.b1, self.w2.as_mut_slice(), &mut self.b2]
    }

    fn params(&self) -> [&[f64]; 4] {
        [self.w1.as_slice(), &self.b1, self.w2.as_slice(), &self.b2]
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.params().iter().flat_map(|s| s.iter().copied()).collect()
    }

    /// Overwrites parameters from a [`FeedforwardNet::flatten`] vector.
    pub fn set_flat(&mut self, flat: &[f64]) -> Result<(), NetworkError> {
        check_len("flat parameters", self.flatten().len(), flat.len())?;
        let mut rest = flat;
        for s in self.params_mut() {
            let (head, tail) = rest.split_at(s.len());
            s.copy_from_slice(head);
            rest = tail;
        }
        Ok(())
    }
}

/// Full-batch gradient descent on mean squared error.
pub fn feedforward_baseline(
    inputs: &[Vec<f64>],
    targets: &[Vec<f64>],
    cfg: &FeedforwardConfig,
) -> Result<FeedforwardNet, NetworkError> {
    let (Some(x0), Some(t0)) = (inputs.first(), targets.first()) else {
        return Err(NetworkError::InsufficientHistory { needed: 1, available: 0 });
    };
    if cfg.hidden == 0 {
        return Err(NetworkError::InvalidConfig("hidden layer must have at least one unit"));
    }
    let mut net = FeedforwardNet::init(x0.len(), cfg.hidden, t0.len(), cfg.seed);
    for _ in 0..cfg.epochs {
        let (_, grad) = net.loss_and_gradient(inputs, targets)?;
        for (p, g) in net.params_mut().into_iter().zip(grad.params()) {
            for (pi, gi) in p.iter_mut().zip(g) {
                *pi -= cfg.learning_rate * gi;
            }
        }
    }
    if net.flatten().iter().any(|v| !v.is_finite()) {
        return Err(NetworkError::NonFinite("baseline weights"));
    }
    Ok(net)
}

/// Builds fixed-window inputs and k-step targets from a feature stream
/// and its realized returns: input `i` flattens `features[i..i+window]`,
/// target `i` is `returns[i+window .. i+window+k]`.
pub fn window_inputs(
    features: &[Vec<f64>],
    returns: &[f64],
    window: usize,
    k: usize,
) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>), NetworkError> {
    check_len("returns", features.len(), returns.len())?;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    if window == 0 {
        return Err(NetworkError::InvalidConfig("window must be positive"));
    }
    let mut i = 0;
    while i + window + k <= features.len() {
        xs.push(features[i..i + window].iter().flat_map(|f| f.iter().copied()).collect());
        ys.push(returns[i + window..i + window + k].to_vec());
        i += 1;
    }
    Ok((xs, ys))
}
