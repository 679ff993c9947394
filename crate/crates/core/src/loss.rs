//! Per-class losses `ℓ_k(g(x))`.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossSpec {
    /// `1{argmax g ≠ k}`, ties broken towards the lowest index.
    ZeroOne,
    /// One-vs-all logistic loss averaged over the K binary problems.
    Logistic,
    /// Squared distance to the one-hot target.
    Squared,
}

impl FromStr for LossSpec {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zero-one" => Ok(LossSpec::ZeroOne),
            "logistic" => Ok(LossSpec::Logistic),
            "squared" => Ok(LossSpec::Squared),
            other => Err(Error::InvalidParams(format!("unknown loss {other:?}"))),
        }
    }
}

impl LossSpec {
    pub fn as_str(&self) -> &'static str {
        match self {
            LossSpec::ZeroOne => "zero-one",
            LossSpec::Logistic => "logistic",
            LossSpec::Squared => "squared",
        }
    }

    pub fn is_differentiable(&self) -> bool {
        !matches!(self, LossSpec::ZeroOne)
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

/// `L = (ℓ_1(scores), …, ℓ_K(scores))`.
pub fn loss_vector(ls: LossSpec, scores: &[f64]) -> Result<Vec<f64>> {
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFiniteScore);
    }
    let k = scores.len();
    Ok(match ls {
        LossSpec::ZeroOne => {
            let top = argmax(scores);
            (0..k).map(|c| if c == top { 0.0 } else { 1.0 }).collect()
        }
        LossSpec::Logistic => {
            let pos: f64 = scores.iter().map(|&s| softplus(s)).sum();
            (0..k)
                .map(|c| (pos - softplus(scores[c]) + softplus(-scores[c])) / k as f64)
                .collect()
        }
        LossSpec::Squared => {
            let sq: f64 = scores.iter().map(|s| s * s).sum();
            (0..k).map(|c| sq - 2.0 * scores[c] + 1.0).collect()
        }
    })
}

/// Jacobian `J[k][c] = ∂ℓ_k / ∂scores_c`.
pub fn loss_jacobian(ls: LossSpec, scores: &[f64]) -> Result<Matrix> {
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFiniteScore);
    }
    let k = scores.len();
    let mut j = Matrix::zeros(k, k);
    match ls {
        LossSpec::ZeroOne => return Err(Error::NonDifferentiableLoss),
        LossSpec::Logistic => {
            let kf = k as f64;
            for row in 0..k {
                for c in 0..k {
                    j[(row, c)] = if row == c {
                        -sigmoid(-scores[c]) / kf
                    } else {
                        sigmoid(scores[c]) / kf
                    };
                }
            }
        }
        LossSpec::Squared => {
            for row in 0..k {
                for c in 0..k {
                    j[(row, c)] = 2.0 * (scores[c] - if row == c { 1.0 } else { 0.0 });
                }
            }
        }
    }
    Ok(j)
}
