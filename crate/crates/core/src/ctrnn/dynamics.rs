use alloc::vec::Vec;

use super::{check_len, NetworkError, NetworkState, Prediction, Topology, Weights};
use crate::market_data::Timestamp;

/// One forward-Euler step of `tau * dy/dt = -y + tanh(W_rec·y + W_in·x + b)`.
pub fn step(state: &NetworkState, w: &Weights, x: &[f64], topo: &Topology) -> Result<NetworkState, NetworkError> {
    check_len("state", topo.n_hidden(), state.y.len())?;
    check_len("input", topo.n_in(), x.len())?;
    let mut next = state.y.clone();
    step_into(&state.y, w, x, topo, &mut next, None);
    Ok(NetworkState { y: next })
}

/// Unchecked step used by the training loops. Writes `y_next` and, when
/// given, the `tanh` outputs for the backward pass.
pub fn step_into(y: &[f64], w: &Weights, x: &[f64], topo: &Topology, y_next: &mut [f64], tanh_out: Option<&mut [f64]>) {
    let mut net = w.b_hidden.clone();
    w.w_rec.mul_vec_acc(y, &mut net);
    w.w_in.mul_vec_acc(x, &mut net);
    let dt = topo.dt();
    for (i, n) in net.iter_mut().enumerate() {
        let u = libm::tanh(*n);
        y_next[i] = y[i] + (dt / topo.tau()[i]) * (u - y[i]);
        *n = u;
    }
    if let Some(t) = tanh_out {
        t.copy_from_slice(&net);
    }
}

/// Linear readout `W_out·y + b_out`.
pub fn readout(state: &NetworkState, w: &Weights) -> Vec<f64> {
    let mut out = w.b_out.clone();
    w.w_out.mul_vec_acc(&state.y, &mut out);
    out
}

pub fn predict(state: &NetworkState, w: &Weights, origin: Timestamp) -> Prediction {
    Prediction {
        origin,
        values: readout(state, w),
    }
}

/// Mean squared error over the horizon.
pub fn loss(predicted: &[f64], target: &[f64]) -> Result<f64, NetworkError> {
    check_len("target", predicted.len(), target.len())?;
    if predicted.is_empty() {
        return Ok(0.0);
    }
    let sse: f64 = predicted.iter().zip(target).map(|(p, t)| (p - t) * (p - t)).sum();
    Ok(sse / predicted.len() as f64)
}
