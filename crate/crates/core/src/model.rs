//! Linear score functions `g(x) = W x + b`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinearModel {
    #[serde(rename = "K")]
    k: usize,
    d: usize,
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

#[derive(Deserialize)]
struct RawModel {
    #[serde(rename = "K")]
    k: usize,
    d: usize,
    weights: Vec<Vec<f64>>,
    bias: Vec<f64>,
}

impl LinearModel {
    pub fn new(weights: Vec<Vec<f64>>, bias: Vec<f64>) -> Result<Self> {
        let k = weights.len();
        let d = weights.first().map_or(0, Vec::len);
        if k < 2 || d == 0 || weights.iter().any(|w| w.len() != d) || bias.len() != k {
            return Err(Error::ShapeMismatch(format!("weights must be Kxd with K >= 2, bias length K (got {k} rows)")));
        }
        if weights.iter().flatten().chain(&bias).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParams("model parameters must be finite".into()));
        }
        Ok(Self { k, d, weights, bias })
    }

    pub fn zeros(k: usize, d: usize) -> Self {
        Self { k, d, weights: vec![vec![0.0; d]; k], bias: vec![0.0; k] }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn scores(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.bias)
            .map(|(w, b)| w.iter().zip(x).map(|(a, v)| a * v).sum::<f64>() + b)
            .collect()
    }

    pub fn predict(&self, x: &[f64]) -> usize {
        crate::loss::argmax(&self.scores(x))
    }

    /// Flattened `(W row-major, b)`.
    pub fn params(&self) -> Vec<f64> {
        self.weights.iter().flatten().chain(&self.bias).copied().collect()
    }

    pub fn set_params(&mut self, p: &[f64]) {
        assert_eq!(p.len(), self.k * (self.d + 1));
        for (r, row) in self.weights.iter_mut().enumerate() {
            row.copy_from_slice(&p[r * self.d..(r + 1) * self.d]);
        }
        self.bias.copy_from_slice(&p[self.k * self.d..]);
    }

    pub fn is_finite(&self) -> bool {
        self.params().iter().all(|v| v.is_finite())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: RawModel = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        let m = Self::new(raw.weights, raw.bias)?;
        if m.k != raw.k || m.d != raw.d {
            return Err(Error::SchemaMismatch("K/d disagree with weights".into()));
        }
        Ok(m)
    }
}

/// Weights uniform in `(-0.1, 0.1)`, zero bias.
pub fn init_model(k: usize, d: usize, seed: u64) -> LinearModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let weights = (0..k).map(|_| (0..d).map(|_| rng.gen_range(-0.1..0.1)).collect()).collect();
    LinearModel { k, d, weights, bias: vec![0.0; k] }
}

/// Weights and bias uniform in `(-scale, scale)`.
pub fn random_model(k: usize, d: usize, scale: f64, seed: u64) -> LinearModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let weights = (0..k).map(|_| (0..d).map(|_| rng.gen_range(-scale..scale)).collect()).collect();
    let bias = (0..k).map(|_| rng.gen_range(-scale..scale)).collect();
    LinearModel { k, d, weights, bias }
}
