//! Full-batch gradient descent on empirical corrected risks.

use serde::{Deserialize, Serialize};

use crate::datagen::WeakDataset;
use crate::decontam::Method;
use crate::error::{Error, Result};
use crate::joint::FiniteJoint;
use crate::loss::{loss_jacobian, LossSpec};
use crate::model::{init_model, LinearModel};
use crate::risk::EmpiricalObjective;

/// A run is declared diverged once `|risk|` exceeds this multiple of
/// `max(1, |initial risk|)`.
pub const DIVERGENCE_FACTOR: f64 = 1e4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    pub epochs: usize,
    pub seed: u64,
    #[serde(default)]
    pub l2: f64,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::InvalidParams(format!("learning rate must be finite and non-negative, got {}", self.lr)));
        }
        if self.epochs == 0 {
            return Err(Error::InvalidParams("epochs must be at least 1".into()));
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return Err(Error::InvalidParams(format!("l2 must be finite and non-negative, got {}", self.l2)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub model: LinearModel,
    /// Empirical risk after each epoch.
    pub trace: Vec<f64>,
}

/// Fully supervised objective: the exact joint risk.
pub fn supervised_objective(j: &FiniteJoint) -> EmpiricalObjective {
    let weights = (0..j.n_x()).map(|i| (0..j.k()).map(|k| j.p(k, i)).collect()).collect();
    EmpiricalObjective::from_weights(weights)
}

fn l2_penalty(model: &LinearModel, l2: f64) -> f64 {
    l2 * model.weights.iter().flatten().map(|w| w * w).sum::<f64>()
}

/// `R̂(g) + λ‖W‖²`.
pub fn objective_value(obj: &EmpiricalObjective, j: &FiniteJoint, model: &LinearModel, ls: LossSpec, l2: f64) -> Result<f64> {
    Ok(obj.risk(j, model, ls)? + l2_penalty(model, l2))
}

/// Gradient of `R̂(g) + λ‖W‖²` in the layout of [`LinearModel::params`].
pub fn empirical_gradient(obj: &EmpiricalObjective, j: &FiniteJoint, model: &LinearModel, ls: LossSpec, l2: f64) -> Result<Vec<f64>> {
    if !ls.is_differentiable() {
        return Err(Error::NonDifferentiableLoss);
    }
    let (k, d) = (model.k(), model.d());
    if obj.weights.len() != j.n_x() || k != j.k() || d != j.d_feat() {
        return Err(Error::ShapeMismatch("objective, model and joint disagree".into()));
    }
    let mut grad = vec![0.0; k * (d + 1)];
    for (i, a) in obj.weights.iter().enumerate() {
        if a.iter().all(|&w| w == 0.0) {
            continue;
        }
        let x = j.feature(i);
        let jac = loss_jacobian(ls, &model.scores(x))?;
        for c in 0..k {
            let g: f64 = (0..k).map(|kk| a[kk] * jac[(kk, c)]).sum();
            for (t, xv) in x.iter().enumerate() {
                grad[c * d + t] += g * xv;
            }
            grad[k * d + c] += g;
        }
    }
    for (g, w) in grad.iter_mut().zip(model.weights.iter().flatten()) {
        *g += 2.0 * l2 * w;
    }
    Ok(grad)
}

/// Central differences of the objective.
pub fn finite_difference_gradient(
    obj: &EmpiricalObjective,
    j: &FiniteJoint,
    model: &LinearModel,
    ls: LossSpec,
    l2: f64,
    eps: f64,
) -> Result<Vec<f64>> {
    let p = model.params();
    let mut probe = model.clone();
    let mut out = Vec::with_capacity(p.len());
    for t in 0..p.len() {
        let mut q = p.clone();
        q[t] = p[t] + eps;
        probe.set_params(&q);
        let up = objective_value(obj, j, &probe, ls, l2)?;
        q[t] = p[t] - eps;
        probe.set_params(&q);
        let down = objective_value(obj, j, &probe, ls, l2)?;
        out.push((up - down) / (2.0 * eps));
    }
    Ok(out)
}

/// `‖a − b‖∞ / max(‖a‖∞, ‖b‖∞)`, zero when both vanish.
pub fn relative_gradient_error(a: &[f64], b: &[f64]) -> f64 {
    let scale = a.iter().chain(b).fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return 0.0;
    }
    crate::linalg::max_abs_diff(a, b) / scale
}

/// Gradient descent from `start` for `cfg.epochs` steps.
pub fn train_objective(
    obj: &EmpiricalObjective,
    j: &FiniteJoint,
    ls: LossSpec,
    cfg: &TrainConfig,
    start: LinearModel,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if !ls.is_differentiable() {
        return Err(Error::NonDifferentiableLoss);
    }
    let mut model = start;
    let r0 = obj.risk(j, &model, ls)?;
    let bound = DIVERGENCE_FACTOR * r0.abs().max(1.0);
    let mut trace = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        let grad = empirical_gradient(obj, j, &model, ls, cfg.l2)?;
        let p: Vec<f64> = model.params().iter().zip(&grad).map(|(w, g)| w - cfg.lr * g).collect();
        if p.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged { epoch });
        }
        model.set_params(&p);
        let risk = match obj.risk(j, &model, ls) {
            Ok(r) => r,
            Err(Error::NonFiniteScore) => return Err(Error::Diverged { epoch }),
            Err(e) => return Err(e),
        };
        if !risk.is_finite() || risk.abs() > bound {
            return Err(Error::Diverged { epoch });
        }
        trace.push(risk);
    }
    Ok(TrainOutcome { model, trace })
}

/// Corrected-loss ERM on a weak dataset, starting from `init_model(K, d, seed)`.
pub fn train_erm(ds: &WeakDataset, j: &FiniteJoint, ls: LossSpec, cfg: &TrainConfig) -> Result<TrainOutcome> {
    let obj = EmpiricalObjective::build(ds, j, Method::Auto)?;
    train_objective(&obj, j, ls, cfg, init_model(j.k(), j.d_feat(), cfg.seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{sample_weak_dataset, SampleSizes};
    use crate::model::random_model;
    use crate::scenarios::ScenarioSpec;

    fn joint() -> FiniteJoint {
        FiniteJoint::new(
            2,
            vec![vec![0.0, 1.0], vec![1.0, -0.5], vec![0.3, 0.2]],
            vec![vec![0.3, 0.1, 0.17], vec![0.05, 0.3, 0.08]],
        )
        .unwrap()
    }

    #[test]
    fn l2_only_gradient() {
        let j = joint();
        let obj = EmpiricalObjective::from_weights(vec![vec![0.0; 2]; 3]);
        let m = random_model(2, 2, 1.0, 1);
        let g = empirical_gradient(&obj, &j, &m, LossSpec::Logistic, 0.3).unwrap();
        let want: Vec<f64> = m.weights.iter().flatten().map(|w| 0.6 * w).chain([0.0, 0.0]).collect();
        assert!(crate::linalg::max_abs_diff(&g, &want) < 1e-15);
    }

    #[test]
    fn gradient_matches_differences() {
        let j = joint();
        let ds = sample_weak_dataset(&ScenarioSpec::Pu {}, &j, &SampleSizes::Total(40), 3).unwrap();
        let obj = EmpiricalObjective::build(&ds, &j, Method::Auto).unwrap();
        let m = random_model(2, 2, 1.0, 2);
        for ls in [LossSpec::Logistic, LossSpec::Squared] {
            let a = empirical_gradient(&obj, &j, &m, ls, 0.1).unwrap();
            let f = finite_difference_gradient(&obj, &j, &m, ls, 0.1, 1e-6).unwrap();
            assert!(relative_gradient_error(&a, &f) < 1e-6);
        }
        assert_eq!(empirical_gradient(&obj, &j, &m, LossSpec::ZeroOne, 0.0), Err(Error::NonDifferentiableLoss));
    }

    #[test]
    fn zero_lr_keeps_model() {
        let j = joint();
        let ds = sample_weak_dataset(&ScenarioSpec::Pu {}, &j, &SampleSizes::Total(40), 3).unwrap();
        let cfg = TrainConfig { lr: 0.0, epochs: 3, seed: 5, l2: 0.0 };
        let out = train_erm(&ds, &j, LossSpec::Logistic, &cfg).unwrap();
        assert_eq!(out.model, init_model(2, 2, 5));
        assert_eq!(out.trace.len(), 3);
    }

    #[test]
    fn supervised_descent_is_monotone() {
        let j = joint();
        let obj = supervised_objective(&j);
        let cfg = TrainConfig { lr: 0.1, epochs: 50, seed: 1, l2: 0.0 };
        let out = train_objective(&obj, &j, LossSpec::Logistic, &cfg, init_model(2, 2, 1)).unwrap();
        assert!(out.trace.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn huge_lr_diverges() {
        let j = joint();
        let ds = sample_weak_dataset(&ScenarioSpec::Pu {}, &j, &SampleSizes::Total(40), 3).unwrap();
        let cfg = TrainConfig { lr: 1e6, epochs: 20, seed: 1, l2: 0.0 };
        assert!(matches!(train_erm(&ds, &j, LossSpec::Logistic, &cfg), Err(Error::Diverged { .. })));
    }
}
