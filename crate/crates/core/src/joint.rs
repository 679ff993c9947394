//! Finite ground-truth joints and their marginals.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const NORMALIZATION_TOL: f64 = 1e-12;

/// `P(Y = k, x_i)` over `K` classes and `n_x` instances with feature vectors.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FiniteJoint {
    #[serde(rename = "K")]
    k: usize,
    features: Vec<Vec<f64>>,
    joint: Vec<Vec<f64>>,
}

#[derive(Deserialize)]
struct RawJoint {
    #[serde(rename = "K")]
    k: usize,
    features: Vec<Vec<f64>>,
    joint: Vec<Vec<f64>>,
}

impl FiniteJoint {
    pub fn new(k: usize, features: Vec<Vec<f64>>, joint: Vec<Vec<f64>>) -> Result<Self> {
        validate_joint(k, features, joint)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n_x(&self) -> usize {
        self.features.len()
    }

    pub fn d_feat(&self) -> usize {
        self.features[0].len()
    }

    pub fn features(&self) -> &[Vec<f64>] {
        &self.features
    }

    pub fn feature(&self, i: usize) -> &[f64] {
        &self.features[i]
    }

    pub fn joint(&self) -> &[Vec<f64>] {
        &self.joint
    }

    pub fn p(&self, k: usize, i: usize) -> f64 {
        self.joint[k][i]
    }

    /// Column `i` of the joint: the risk-defining vector `P(x_i)`.
    pub fn risk_vector(&self, i: usize) -> Result<Vec<f64>> {
        if i >= self.n_x() {
            return Err(Error::IndexOutOfRange { index: i, len: self.n_x() });
        }
        Ok(self.joint.iter().map(|row| row[i]).collect())
    }

    pub fn instance_mass(&self, i: usize) -> f64 {
        self.joint.iter().map(|row| row[i]).sum()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("joint serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: RawJoint = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        validate_joint(raw.k, raw.features, raw.joint)
    }
}

impl<'de> Deserialize<'de> for FiniteJoint {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = RawJoint::deserialize(d)?;
        validate_joint(raw.k, raw.features, raw.joint).map_err(serde::de::Error::custom)
    }
}

/// Checks shapes, signs, normalization and positive instance mass.
pub fn validate_joint(k: usize, features: Vec<Vec<f64>>, joint: Vec<Vec<f64>>) -> Result<FiniteJoint> {
    if k < 2 {
        return Err(Error::ShapeMismatch(format!("K must be at least 2, got {k}")));
    }
    if joint.len() != k {
        return Err(Error::ShapeMismatch(format!("joint has {} rows, K = {k}", joint.len())));
    }
    let n = features.len();
    if n == 0 {
        return Err(Error::ShapeMismatch("no instances".into()));
    }
    let d = features[0].len();
    if d == 0 || features.iter().any(|f| f.len() != d) {
        return Err(Error::ShapeMismatch("features must share a positive dimension".into()));
    }
    if features.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::ShapeMismatch("non-finite feature value".into()));
    }
    for row in &joint {
        if row.len() != n {
            return Err(Error::ShapeMismatch(format!("joint row has {} columns, n_x = {n}", row.len())));
        }
    }
    for (kk, row) in joint.iter().enumerate() {
        for (i, &v) in row.iter().enumerate() {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::NegativeEntry { k: kk, i });
            }
        }
    }
    let sum: f64 = joint.iter().flatten().sum();
    if (sum - 1.0).abs() > NORMALIZATION_TOL {
        return Err(Error::NonNormalized { sum });
    }
    for i in 0..n {
        if joint.iter().all(|row| row[i] == 0.0) {
            return Err(Error::ZeroInstanceMass { i });
        }
    }
    Ok(FiniteJoint { k, features, joint })
}

/// Derived quantities of a joint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Marginals {
    pub priors: Vec<f64>,
    pub instance_marginal: Vec<f64>,
    /// `P(x_i | Y = k)`, K rows.
    pub class_conditionals: Vec<Vec<f64>>,
    /// `r_k(x_i) = P(Y = k | x_i)`, K rows.
    pub class_probabilities: Vec<Vec<f64>>,
}

impl Marginals {
    pub fn k(&self) -> usize {
        self.priors.len()
    }

    pub fn n_x(&self) -> usize {
        self.instance_marginal.len()
    }

    /// Class-probability column `r(x_i)`.
    pub fn r(&self, i: usize) -> Vec<f64> {
        self.class_probabilities.iter().map(|row| row[i]).collect()
    }

    /// `(P(x_i|p), P(x_i|n))` for binary joints.
    pub fn conditionals_at(&self, i: usize) -> Vec<f64> {
        self.class_conditionals.iter().map(|row| row[i]).collect()
    }
}

pub fn marginals(j: &FiniteJoint) -> Result<Marginals> {
    let n = j.n_x();
    let priors: Vec<f64> = j.joint.iter().map(|row| row.iter().sum()).collect();
    if let Some(k) = priors.iter().position(|&p| p == 0.0) {
        return Err(Error::EmptyClass { k });
    }
    let instance_marginal: Vec<f64> = (0..n).map(|i| j.instance_mass(i)).collect();
    let class_conditionals = j
        .joint
        .iter()
        .zip(&priors)
        .map(|(row, &pk)| row.iter().map(|v| v / pk).collect())
        .collect();
    let class_probabilities = j
        .joint
        .iter()
        .map(|row| row.iter().zip(&instance_marginal).map(|(v, px)| v / px).collect())
        .collect();
    Ok(Marginals { priors, instance_marginal, class_conditionals, class_probabilities })
}
