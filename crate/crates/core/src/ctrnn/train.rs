use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use super::dynamics::{loss, step_into};
use super::gradient::bptt_gradient;
use super::optim::online_update;
use super::{check_len, NetworkError, NetworkState, Prediction, Topology, TrainConfig, Weights};
use crate::market_data::Timestamp;

/// One bar of the training stream.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub timestamp: Timestamp,
    pub features: Vec<f64>,
    /// Log-return realized into this bar.
    pub realized: f64,
}

/// Squared error accumulated over the whole run, never reset between epochs.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RunningError {
    pub summed_sq_error: f64,
    pub n_terms: u64,
}

impl RunningError {
    pub fn add(&mut self, loss: f64) {
        self.summed_sq_error += loss;
        self.n_terms += 1;
    }

    pub fn mean(&self) -> f64 {
        if self.n_terms == 0 {
            0.0
        } else {
            self.summed_sq_error / self.n_terms as f64
        }
    }
}

/// A prediction whose full horizon has been realized.
#[derive(Debug, Clone, PartialEq)]
pub struct Matured {
    pub origin: Timestamp,
    pub predicted: Vec<f64>,
    pub realized: Vec<f64>,
    pub loss: f64,
    /// Whether enough history existed to apply a gradient step.
    pub updated: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutput {
    pub prediction: Prediction,
    pub matured: Option<Matured>,
}

#[derive(Debug, Clone)]
struct MeshRecord {
    y_before: Vec<f64>,
    input: Vec<f64>,
}

#[derive(Debug, Clone)]
struct Pending {
    origin: Timestamp,
    predicted: Vec<f64>,
    /// Global mesh index just after the bar the prediction was made on.
    mesh_end: u64,
    realized: Vec<f64>,
}

/// Online CTRNN learner. Each [`OnlineTrainer::push`] advances the
/// dynamics by one bar, emits a prediction and, once an earlier prediction
/// has seen its whole horizon realized, applies one gradient step.
#[derive(Debug, Clone)]
pub struct OnlineTrainer {
    topo: Topology,
    cfg: TrainConfig,
    weights: Weights,
    stats: Weights,
    state: NetworkState,
    substeps: usize,
    history: VecDeque<MeshRecord>,
    history_start: u64,
    mesh_count: u64,
    pending: VecDeque<Pending>,
    running: RunningError,
    updates: u64,
}

impl OnlineTrainer {
    pub fn new(topo: Topology, cfg: TrainConfig) -> Result<Self, NetworkError> {
        let weights = Weights::init(&topo, cfg.seed);
        Self::with_weights(topo, cfg, weights)
    }

    pub fn with_weights(topo: Topology, cfg: TrainConfig, weights: Weights) -> Result<Self, NetworkError> {
        cfg.validate()?;
        let substeps = topo.substeps_per_bar()?;
        if !weights.matches(&topo) {
            return Err(NetworkError::InvalidTopology("weights do not match topology"));
        }
        if !weights.is_finite() {
            return Err(NetworkError::NonFinite("weights"));
        }
        Ok(Self {
            stats: Weights::zeros(&topo),
            state: NetworkState::zeros(&topo),
            weights,
            substeps,
            history: VecDeque::new(),
            history_start: 0,
            mesh_count: 0,
            pending: VecDeque::new(),
            running: RunningError::default(),
            updates: 0,
            topo,
            cfg,
        })
    }

    pub fn topology(&self) -> &Topology {
        &self.topo
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn weights(&self) -> &Weights {
        &self.weights
    }

    pub fn state(&self) -> &NetworkState {
        &self.state
    }

    pub fn running_error(&self) -> RunningError {
        self.running
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    /// Mesh steps kept for gradient replay.
    fn history_capacity(&self) -> usize {
        self.cfg.truncation_depth + (self.topo.horizon() + 1) * self.substeps
    }

    pub fn push(&mut self, sample: &Sample) -> Result<StepOutput, NetworkError> {
        check_len("features", self.topo.n_in(), sample.features.len())?;
        if !sample.realized.is_finite() || sample.features.iter().any(|v| !v.is_finite()) {
            return Err(NetworkError::NonFinite("sample"));
        }

        // Dynamics on the mesh.
        let n = self.topo.n_hidden();
        let mut next = vec![0.0; n];
        for _ in 0..self.substeps {
            self.history.push_back(MeshRecord {
                y_before: self.state.y.clone(),
                input: sample.features.clone(),
            });
            step_into(&self.state.y, &self.weights, &sample.features, &self.topo, &mut next, None);
            core::mem::swap(&mut self.state.y, &mut next);
            self.mesh_count += 1;
        }
        while self.history.len() > self.history_capacity() {
            self.history.pop_front();
            self.history_start += 1;
        }

        let prediction = super::dynamics::predict(&self.state, &self.weights, sample.timestamp);

        // The realized return of this bar extends every older prediction.
        for p in self.pending.iter_mut() {
            p.realized.push(sample.realized);
        }
        let matured = match self.pending.front() {
            Some(p) if p.realized.len() == self.topo.horizon() => {
                let p = self.pending.pop_front().expect("front exists");
                Some(self.learn(p)?)
            }
            _ => None,
        };

        self.pending.push_back(Pending {
            origin: sample.timestamp,
            predicted: prediction.values.clone(),
            mesh_end: self.mesh_count,
            realized: Vec::with_capacity(self.topo.horizon()),
        });

        Ok(StepOutput { prediction, matured })
    }

    fn learn(&mut self, p: Pending) -> Result<Matured, NetworkError> {
        let err = loss(&p.predicted, &p.realized)?;
        self.running.add(err);
        let depth = self.cfg.truncation_depth as u64;
        let updated = p.mesh_end >= self.history_start + depth;
        if updated {
            let first = (p.mesh_end - depth - self.history_start) as usize;
            let window: Vec<Vec<f64>> = self
                .history
                .range(first..first + depth as usize)
                .map(|r| r.input.clone())
                .collect();
            let start = NetworkState {
                y: self.history[first].y_before.clone(),
            };
            let g = bptt_gradient(&self.weights, &start, &window, &p.realized, &self.topo, depth as usize)?;
            online_update(&mut self.weights, &g.gradient, &mut self.stats, &self.cfg);
            if !self.weights.is_finite() {
                return Err(NetworkError::NonFinite("weights"));
            }
            self.updates += 1;
        }
        Ok(Matured {
            origin: p.origin,
            predicted: p.predicted,
            realized: p.realized,
            loss: err,
            updated,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub weights: Weights,
    pub running: RunningError,
    /// `summed_sq_error` after each matured prediction.
    pub error_trace: Vec<f64>,
    pub updates: u64,
}

/// Consumes a finite stream and returns the final weights and error trace.
pub fn train_online<I>(stream: I, topo: &Topology, cfg: &TrainConfig) -> Result<TrainOutcome, NetworkError>
where
    I: IntoIterator<Item = Sample>,
{
    let mut trainer = OnlineTrainer::new(topo.clone(), cfg.clone())?;
    let mut error_trace = Vec::new();
    for sample in stream {
        let out = trainer.push(&sample)?;
        if out.matured.is_some() {
            error_trace.push(trainer.running_error().summed_sq_error);
        }
    }
    Ok(TrainOutcome {
        weights: trainer.weights().clone(),
        running: trainer.running_error(),
        error_trace,
        updates: trainer.updates(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ctrnn::dynamics::step;

    fn sine_stream(n: usize) -> Vec<Sample> {
        (0..n)
            .map(|t| {
                let r = 0.01 * libm::sin(2.0 * core::f64::consts::PI * t as f64 / 20.0);
                Sample {
                    timestamp: Timestamp(t as i64),
                    features: vec![r * 100.0],
                    realized: r,
                }
            })
            .collect()
    }

    fn topo() -> Topology {
        Topology::uniform(1, 4, 3, 0.5, 1.0).unwrap()
    }

    #[test]
    fn empty_stream_returns_initial_weights() {
        let cfg = TrainConfig::default();
        let out = train_online(Vec::new(), &topo(), &cfg).unwrap();
        assert_eq!(out.weights, Weights::init(&topo(), cfg.seed));
        assert_eq!(out.running.n_terms, 0);
    }

    #[test]
    fn error_trace_is_non_decreasing() {
        let out = train_online(sine_stream(300), &topo(), &TrainConfig::default()).unwrap();
        assert!(out.error_trace.windows(2).all(|w| w[1] >= w[0]));
        assert_eq!(out.running.n_terms, 297);
        assert!(out.updates > 0);
    }

    #[test]
    fn deterministic_given_seed_and_stream() {
        let cfg = TrainConfig {
            seed: 42,
            ..TrainConfig::default()
        };
        let a = train_online(sine_stream(200), &topo(), &cfg).unwrap();
        let b = train_online(sine_stream(200), &topo(), &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn online_equals_sequential_replay() {
        // Replays the trainer with the public building blocks: one Euler
        // mesh, one matured prediction and at most one update per bar.
        let topo = topo();
        let cfg = TrainConfig {
            truncation_depth: 4,
            seed: 3,
            ..TrainConfig::default()
        };
        let stream = sine_stream(60);
        let out = train_online(stream.clone(), &topo, &cfg).unwrap();

        let k = topo.horizon();
        let mut w = Weights::init(&topo, cfg.seed);
        let mut stats = Weights::zeros(&topo);
        let mut y = NetworkState::zeros(&topo);
        let mut starts: Vec<NetworkState> = Vec::new();
        let mut inputs: Vec<Vec<f64>> = Vec::new();
        let mut preds: Vec<Vec<f64>> = Vec::new();
        let mut running = RunningError::default();
        for (t, s) in stream.iter().enumerate() {
            for _ in 0..2 {
                starts.push(y.clone());
                inputs.push(s.features.clone());
                y = step(&y, &w, &s.features, &topo).unwrap();
            }
            preds.push(crate::ctrnn::readout(&y, &w));
            if t >= k {
                let origin = t - k;
                let target: Vec<f64> = (origin + 1..=t).map(|j| stream[j].realized).collect();
                running.add(loss(&preds[origin], &target).unwrap());
                let end = 2 * (origin + 1);
                if end >= cfg.truncation_depth {
                    let first = end - cfg.truncation_depth;
                    let g = bptt_gradient(&w, &starts[first], &inputs[first..end], &target, &topo, cfg.truncation_depth)
                        .unwrap();
                    online_update(&mut w, &g.gradient, &mut stats, &cfg);
                }
            }
        }
        assert_eq!(out.weights, w);
        assert_eq!(out.running, running);
    }

    #[test]
    fn rejects_bad_samples() {
        let mut t = OnlineTrainer::new(topo(), TrainConfig::default()).unwrap();
        let bad = Sample {
            timestamp: Timestamp(0),
            features: vec![1.0, 2.0],
            realized: 0.0,
        };
        assert!(matches!(t.push(&bad), Err(NetworkError::DimensionMismatch { .. })));
        let bad = Sample {
            timestamp: Timestamp(0),
            features: vec![f64::NAN],
            realized: 0.0,
        };
        assert_eq!(t.push(&bad), Err(NetworkError::NonFinite("sample")));
    }
}
