//! Versioned JSON weights checkpoint.

use std::path::Path;

use ctrnn_core::ctrnn::Topology;
use ctrnn_core::math::Matrix;
use ctrnn_core::Weights;
use serde::{Deserialize, Serialize};

use crate::csv_io::write_file;
use crate::error::{AppError, Result};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologyDoc {
    pub n_in: usize,
    pub n_hidden: usize,
    pub n_out: usize,
    pub dt: f64,
    pub tau: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixDoc {
    pub rows: usize,
    pub cols: usize,
    /// Row-major entries.
    pub data: Vec<f64>,
}

impl From<&Matrix> for MatrixDoc {
    fn from(m: &Matrix) -> Self {
        Self {
            rows: m.rows(),
            cols: m.cols(),
            data: m.as_slice().to_vec(),
        }
    }
}

impl MatrixDoc {
    fn to_matrix(&self, name: &str) -> Result<Matrix> {
        Matrix::from_row_major(self.rows, self.cols, self.data.clone())
            .ok_or_else(|| AppError::Data(format!("checkpoint matrix {name} has the wrong number of entries")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub version: u32,
    pub symbol: String,
    pub topology: TopologyDoc,
    pub seed: u64,
    pub updates: u64,
    /// Bars in the feature normalization window used in training.
    pub feature_window: usize,
    pub w_in: MatrixDoc,
    pub w_rec: MatrixDoc,
    pub w_out: MatrixDoc,
    pub b_hidden: Vec<f64>,
    pub b_out: Vec<f64>,
}

impl Checkpoint {
    pub fn new(symbol: &str, topo: &Topology, weights: &Weights, seed: u64, updates: u64, feature_window: usize) -> Self {
        Self {
            version: CHECKPOINT_VERSION,
            symbol: symbol.to_string(),
            topology: TopologyDoc {
                n_in: topo.n_in(),
                n_hidden: topo.n_hidden(),
                n_out: topo.n_out(),
                dt: topo.dt(),
                tau: topo.tau().to_vec(),
            },
            seed,
            updates,
            feature_window,
            w_in: (&weights.w_in).into(),
            w_rec: (&weights.w_rec).into(),
            w_out: (&weights.w_out).into(),
            b_hidden: weights.b_hidden.clone(),
            b_out: weights.b_out.clone(),
        }
    }

    pub fn topology(&self) -> Result<Topology> {
        let t = &self.topology;
        Topology::new(t.n_in, t.n_hidden, t.n_out, t.dt, t.tau.clone())
            .map_err(|e| AppError::Data(format!("checkpoint topology: {e}")))
    }

    pub fn weights(&self) -> Result<Weights> {
        let w = Weights {
            w_in: self.w_in.to_matrix("w_in")?,
            w_rec: self.w_rec.to_matrix("w_rec")?,
            w_out: self.w_out.to_matrix("w_out")?,
            b_hidden: self.b_hidden.clone(),
            b_out: self.b_out.clone(),
        };
        if !w.matches(&self.topology()?) {
            return Err(AppError::Data("checkpoint weights do not match its topology".into()));
        }
        if !w.is_finite() {
            return Err(AppError::Numerical("checkpoint holds non-finite weights".into()));
        }
        Ok(w)
    }

    pub fn to_json(&self) -> Result<String> {
        if !self.weights()?.is_finite() {
            return Err(AppError::Numerical("refusing to save non-finite weights".into()));
        }
        serde_json::to_string_pretty(self).map_err(|e| AppError::Numerical(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cp: Checkpoint = serde_json::from_str(text).map_err(|e| AppError::Data(format!("checkpoint: {e}")))?;
        if cp.version != CHECKPOINT_VERSION {
            return Err(AppError::Data(format!("unsupported checkpoint version {}", cp.version)));
        }
        cp.weights()?;
        Ok(cp)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_file(path, self.to_json()?.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
        Self::from_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn round_trip_is_bit_exact() {
        let topo = Topology::new(3, 5, 4, 0.5, vec![1.0, 0.7, 1.3, 2.0, 0.9]).unwrap();
        let mut w = Weights::init(&topo, 17);
        // Awkward values: subnormals, long mantissas, negative zero.
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for s in w.slices_mut() {
            for v in s.iter_mut() {
                *v *= rng.gen_range(1e-3..1e3);
            }
        }
        w.b_hidden[0] = f64::MIN_POSITIVE / 3.0;
        w.b_hidden[1] = -0.0;
        w.b_out[0] = 0.1 + 0.2;
        let cp = Checkpoint::new("ABC", &topo, &w, 17, 12345, 20);
        let back = Checkpoint::from_json(&cp.to_json().unwrap()).unwrap();
        assert_eq!(back, cp);
        let bits = |w: &Weights| w.flatten().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back.weights().unwrap()), bits(&w));
        assert_eq!(back.topology().unwrap(), topo);
        assert_eq!((back.seed, back.updates), (17, 12345));
    }

    #[test]
    fn rejects_wrong_version_and_shape() {
        let topo = Topology::uniform(3, 2, 2, 0.5, 1.0).unwrap();
        let cp = Checkpoint::new("A", &topo, &Weights::init(&topo, 1), 1, 0, 20);
        let mut doc: serde_json::Value = serde_json::from_str(&cp.to_json().unwrap()).unwrap();
        doc["version"] = 99.into();
        assert!(Checkpoint::from_json(&doc.to_string()).is_err());
        let mut doc: serde_json::Value = serde_json::from_str(&cp.to_json().unwrap()).unwrap();
        doc["w_rec"]["data"].as_array_mut().unwrap().pop();
        assert!(Checkpoint::from_json(&doc.to_string()).is_err());
    }
}
