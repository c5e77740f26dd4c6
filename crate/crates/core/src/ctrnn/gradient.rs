use alloc::vec;
use alloc::vec::Vec;

use super::dynamics::step_into;
use super::{check_len, NetworkError, NetworkState, Topology, Weights};

#[derive(Debug, Clone, PartialEq)]
pub struct GradientResult {
    pub loss: f64,
    pub prediction: Vec<f64>,
    pub gradient: Weights,
}

/// Truncated BPTT through the last `depth` Euler steps.
///
/// The trajectory is replayed from `start` (the state before the first of
/// the last `depth` inputs) under the current weights, the readout error
/// against `target` is injected at the final state, and sensitivities are
/// carried back `depth` steps. `start` is held constant, which is where the
/// truncation happens.
pub fn bptt_gradient(
    w: &Weights,
    start: &NetworkState,
    inputs: &[Vec<f64>],
    target: &[f64],
    topo: &Topology,
    depth: usize,
) -> Result<GradientResult, NetworkError> {
    if inputs.len() < depth || depth == 0 {
        return Err(NetworkError::InsufficientHistory {
            needed: depth.max(1),
            available: inputs.len(),
        });
    }
    check_len("state", topo.n_hidden(), start.y.len())?;
    check_len("target", topo.n_out(), target.len())?;
    let inputs = &inputs[inputs.len() - depth..];
    for x in inputs {
        check_len("input", topo.n_in(), x.len())?;
    }

    let n = topo.n_hidden();
    // ys[s] is the state after s steps; us[s] the tanh output of step s+1.
    let mut ys: Vec<Vec<f64>> = Vec::with_capacity(depth + 1);
    let mut us: Vec<Vec<f64>> = Vec::with_capacity(depth);
    ys.push(start.y.clone());
    for x in inputs {
        let mut next = vec![0.0; n];
        let mut u = vec![0.0; n];
        step_into(ys.last().unwrap(), w, x, topo, &mut next, Some(&mut u));
        ys.push(next);
        us.push(u);
    }

    let y_end = &ys[depth];
    let mut prediction = w.b_out.clone();
    w.w_out.mul_vec_acc(y_end, &mut prediction);
    let k = target.len() as f64;
    let residual: Vec<f64> = prediction.iter().zip(target).map(|(p, t)| p - t).collect();
    let loss = residual.iter().map(|e| e * e).sum::<f64>() / k;
    let d_out: Vec<f64> = residual.iter().map(|e| 2.0 * e / k).collect();

    let mut g = Weights::zeros(topo);
    g.w_out.add_outer(&d_out, y_end);
    g.b_out.copy_from_slice(&d_out);

    let rate: Vec<f64> = topo.tau().iter().map(|tau| topo.dt() / tau).collect();
    let mut d_y = vec![0.0; n];
    w.w_out.mul_vec_transposed_acc(&d_out, &mut d_y);
    let mut d_net = vec![0.0; n];
    for s in (0..depth).rev() {
        for i in 0..n {
            let u = us[s][i];
            d_net[i] = d_y[i] * rate[i] * (1.0 - u * u);
        }
        g.w_rec.add_outer(&d_net, &ys[s]);
        g.w_in.add_outer(&d_net, &inputs[s]);
        for (gb, d) in g.b_hidden.iter_mut().zip(&d_net) {
            *gb += d;
        }
        if s > 0 {
            for i in 0..n {
                d_y[i] *= 1.0 - rate[i];
            }
            w.w_rec.mul_vec_transposed_acc(&d_net, &mut d_y);
        }
    }

    Ok(GradientResult {
        loss,
        prediction,
        gradient: g,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ctrnn::dynamics::{loss, readout, step};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn instance(seed: u64) -> (Topology, Weights, NetworkState, Vec<Vec<f64>>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let topo = Topology::new(2, 5, 3, 0.5, (0..5).map(|_| rng.gen_range(0.5..2.0)).collect()).unwrap();
        let w = Weights::init(&topo, seed);
        let start = NetworkState {
            y: (0..5).map(|_| rng.gen_range(-0.8..0.8)).collect(),
        };
        let inputs = (0..3).map(|_| (0..2).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let target = (0..3).map(|_| rng.gen_range(-0.5..0.5)).collect();
        (topo, w, start, inputs, target)
    }

    fn forward_loss(w: &Weights, start: &NetworkState, inputs: &[Vec<f64>], target: &[f64], topo: &Topology) -> f64 {
        let mut s = start.clone();
        for x in inputs {
            s = step(&s, w, x, topo).unwrap();
        }
        loss(&readout(&s, w), target).unwrap()
    }

    #[test]
    fn output_bias_gradient_is_scaled_residual() {
        let (topo, w, start, inputs, target) = instance(1);
        let r = bptt_gradient(&w, &start, &inputs, &target, &topo, 3).unwrap();
        for i in 0..3 {
            let expected = 2.0 / 3.0 * (r.prediction[i] - target[i]);
            assert!((r.gradient.b_out[i] - expected).abs() < 1e-15);
        }
        assert!((r.loss - forward_loss(&w, &start, &inputs, &target, &topo)).abs() < 1e-15);
    }

    #[test]
    fn zero_residual_gives_zero_gradient() {
        let (topo, w, start, inputs, _) = instance(2);
        let target = bptt_gradient(&w, &start, &inputs, &[0.0; 3], &topo, 3).unwrap().prediction;
        let r = bptt_gradient(&w, &start, &inputs, &target, &topo, 3).unwrap();
        assert!(r.gradient.flatten().iter().all(|g| g.abs() < 1e-10));
    }

    #[test]
    fn insufficient_history() {
        let (topo, w, start, inputs, target) = instance(3);
        assert_eq!(
            bptt_gradient(&w, &start, &inputs[..2], &target, &topo, 3),
            Err(NetworkError::InsufficientHistory { needed: 3, available: 2 })
        );
    }

    #[test]
    fn uses_only_the_last_depth_inputs() {
        let (topo, w, start, mut inputs, target) = instance(4);
        let a = bptt_gradient(&w, &start, &inputs[1..], &target, &topo, 2).unwrap();
        inputs[0] = alloc::vec![100.0, -100.0];
        let b = bptt_gradient(&w, &start, &inputs, &target, &topo, 2).unwrap();
        assert_eq!(a, b);
    }
}
