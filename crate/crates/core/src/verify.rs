//! Seeded checks of every identity the library relies on.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::datagen::{sample_weak_dataset, SampleSizes};
use crate::decontam::{
    decontaminate, decontaminate_marginal_chain, decontaminate_model, mcl_block, mcl_block_inverse,
    ppl_closed_form, reconstruction_error, sconf_mixing_error, Method,
};
use crate::error::{Error, Result};
use crate::joint::{marginals, FiniteJoint};
use crate::linalg::{binomial, max_abs_diff, Matrix};
use crate::loss::LossSpec;
use crate::model::{random_model, LinearModel};
use crate::risk::{
    classification_risk, closed_form_corrected_loss, corrected_losses, loss_table, pairwise_rewritten_risk,
    pcpl_half_identity, rewritten_risk_mutated, sconf_rewritten_risk_x_only, EmpiricalObjective, Mutation,
};
use crate::scenarios::{
    compound_label_space, contamination_matrix, observed_distribution, pair_distribution, reduce,
    reduction_row_map, sconf_confidence, Family, PairKind, ScenarioSpec, K_MAX, REDUCTION_EDGES,
};
use crate::train::{empirical_gradient, finite_difference_gradient, relative_gradient_error};

pub const MATRIX_TOL: f64 = 1e-12;
pub const RISK_TOL: f64 = 1e-10;
pub const REDUCTION_TOL: f64 = 1e-15;
pub const WORKED_EXAMPLE_TOL: f64 = 1e-14;
pub const PPL_CLOSED_FORM_TOL: f64 = 1e-14;
pub const GRADIENT_TOL: f64 = 1e-5;
pub const MC_STANDARD_ERRORS: f64 = 5.0;
pub const FD_EPS: f64 = 1e-6;

/// Random joints whose prior sits closer than this to 1/2 are redrawn for
/// scenarios that divide by `π_p − π_n`.
const PRIOR_MARGIN: f64 = 0.05;
/// Sconf joints need `r(x, x')` this far from both priors at every pair.
const SCONF_MARGIN: f64 = 0.005;
const MAX_REJECTIONS: usize = 100_000;
const FEATURE_DIM: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub name: String,
    pub scenario: String,
    pub params: Value,
    /// `None` when the check could not run.
    pub max_abs_err: Option<f64>,
    pub tol: f64,
    pub pass: bool,
    pub seed: u64,
    pub elapsed_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl CheckReport {
    fn run(name: &str, scenario: &str, params: Value, tol: f64, seed: u64, f: impl FnOnce() -> Result<f64>) -> Self {
        let t = Instant::now();
        let out = f();
        let elapsed_s = t.elapsed().as_secs_f64();
        let (max_abs_err, error) = match out {
            Ok(e) => (Some(e), None),
            Err(e) => (None, Some(e.to_string())),
        };
        Self {
            name: name.into(),
            scenario: scenario.into(),
            params,
            pass: max_abs_err.is_some_and(|e| e <= tol),
            max_abs_err,
            tol,
            seed,
            elapsed_s,
            error,
        }
    }

    fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub seed: u64,
    pub checks: Vec<CheckReport>,
    pub pass: bool,
}

impl Report {
    pub fn new(seed: u64, checks: Vec<CheckReport>) -> Self {
        let pass = checks.iter().all(|c| c.pass);
        Self { seed, checks, pass }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckReport> {
        self.checks.iter().filter(|c| !c.pass)
    }
}

fn spec_params(spec: &ScenarioSpec, j: &FiniteJoint) -> Value {
    json!({ "K": j.k(), "n_x": j.n_x(), "spec": spec.params() })
}

fn with_method(mut v: Value, method: Method) -> Value {
    v["method"] = json!(method.as_str());
    v
}

/// `max_x ‖M†(x) corrP(x) − P(x)‖∞`.
pub fn verify_reconstruction(spec: &ScenarioSpec, j: &FiniteJoint, tol: f64) -> CheckReport {
    verify_reconstruction_with(spec, j, Method::Auto, tol)
}

pub fn verify_reconstruction_with(spec: &ScenarioSpec, j: &FiniteJoint, method: Method, tol: f64) -> CheckReport {
    CheckReport::run("reconstruction", spec.name(), with_method(spec_params(spec, j), method), tol, 0, || {
        let cm = observed_distribution(spec, j)?;
        let dr = decontaminate_model(&cm, j, method)?;
        reconstruction_error(&cm, &dr, j)
    })
}

/// `|rewritten risk − classification risk|`.
pub fn verify_risk_equality(spec: &ScenarioSpec, j: &FiniteJoint, model: &LinearModel, ls: LossSpec, tol: f64) -> CheckReport {
    verify_risk_equality_with(spec, j, model, ls, Method::Auto, Mutation::None, tol)
}

pub fn verify_risk_equality_with(
    spec: &ScenarioSpec,
    j: &FiniteJoint,
    model: &LinearModel,
    ls: LossSpec,
    method: Method,
    mutation: Mutation,
    tol: f64,
) -> CheckReport {
    let mut params = with_method(spec_params(spec, j), method);
    params["loss"] = json!(ls.as_str());
    if mutation != Mutation::None {
        params["mutation"] = json!("flip-first-channel");
    }
    CheckReport::run("risk_equality", spec.name(), params, tol, 0, || {
        let exact = classification_risk(j, model, ls)?;
        let r = rewritten_risk_mutated(spec, j, model, ls, method, mutation)?;
        Ok((r - exact).abs())
    })
}

/// Entrywise gap between a child's matrix and its instantiated parent's,
/// relative to the entry size once entries exceed 1.
pub fn reduction_error(parent: &str, child: &ScenarioSpec, j: &FiniteJoint) -> Result<f64> {
    let red = reduce(parent, child, j)?;
    let m = marginals(j)?;
    let map = reduction_row_map(parent, child, j.k())?;
    let mut worst = 0.0f64;
    for i in 0..j.n_x() {
        let pm = contamination_matrix(&red.parent, &m, i)?;
        let cm = contamination_matrix(child, &m, i)?;
        if cm.cols() != pm.cols() {
            return Err(Error::ShapeMismatch(format!("{parent} -> {}: column counts differ", child.name())));
        }
        let mut hit = vec![false; pm.rows()];
        for (row, &target) in map.iter().enumerate() {
            hit[target] = true;
            for (a, b) in cm.row(row).iter().zip(pm.row(target)) {
                worst = worst.max((a - b).abs() / b.abs().max(1.0));
            }
        }
        for (row, used) in hit.iter().enumerate() {
            if !used {
                worst = worst.max(pm.row(row).iter().fold(0.0f64, |m, v| m.max(v.abs())));
            }
        }
    }
    Ok(worst)
}

/// Every reduction edge whose child can live on `j`, with seeded child
/// parameters.
pub fn verify_reduction_graph(j: &FiniteJoint, seed: u64, tol: f64) -> Vec<CheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for &(parent, child_name) in REDUCTION_EDGES.iter() {
        let child = match random_spec(child_name, j.k(), j.n_x(), &mut rng) {
            Ok(c) => c,
            Err(_) => continue,
        };
        if child.is_binary() && j.k() != 2 {
            continue;
        }
        let mut params = spec_params(&child, j);
        params["parent"] = json!(parent);
        out.push(CheckReport::run("reduction", child_name, params, tol, seed, || reduction_error(parent, &child, j)));
    }
    out
}

/// CL with K = 4: the matrix, its exact inverse, and both reconstructions.
pub fn verify_worked_example() -> Vec<CheckReport> {
    verify_worked_example_seeded(0)
}

fn verify_worked_example_seeded(seed: u64) -> Vec<CheckReport> {
    let k = 4;
    let third = 1.0 / 3.0;
    let params = json!({ "K": k });
    let matrices = CheckReport::run("worked_example_matrices", "CL", params.clone(), 0.0, seed, || {
        let uniform = FiniteJoint::new(k, vec![vec![0.0]], vec![vec![0.25]; k])?;
        let m = marginals(&uniform)?;
        let mm = contamination_matrix(&ScenarioSpec::Cl {}, &m, 0)?;
        let inv = decontaminate(&ScenarioSpec::Cl {}, &uniform, Method::Inversion)?.mdagger[0].clone();
        let mut err = 0.0f64;
        for a in 0..k {
            for b in 0..k {
                let (want_m, want_inv) = if a == b { (0.0, -2.0) } else { (third, 1.0) };
                err = err.max((mm[(a, b)] - want_m).abs()).max((inv[(a, b)] - want_inv).abs());
            }
        }
        let chain = decontaminate_marginal_chain(&ScenarioSpec::Cl {}, &uniform, 0)?;
        for a in 0..k {
            for b in 0..k {
                let want = if a == b { 0.0 } else { third };
                err = err.max((chain[(a, b)] - want).abs());
            }
        }
        Ok(err)
    });
    let recon = CheckReport::run("worked_example_reconstruction", "CL", params, WORKED_EXAMPLE_TOL, seed, || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let raw: Vec<f64> = (0..k).map(|_| 0.05 + rng.gen::<f64>()).collect();
        let total: f64 = raw.iter().sum();
        let j = FiniteJoint::new(k, vec![vec![0.0]], raw.iter().map(|v| vec![v / total]).collect())?;
        let cm = observed_distribution(&ScenarioSpec::Cl {}, &j)?;
        let mut err = 0.0f64;
        for method in [Method::Inversion, Method::MarginalChain] {
            err = err.max(reconstruction_error(&cm, &decontaminate_model(&cm, &j, method)?, &j)?);
        }
        let generic = cm.m[0].inverse()?;
        err = err.max(max_abs_diff(&generic.mul_vec(&cm.corr_p[0])?, &j.risk_vector(0)?));
        Ok(err)
    });
    vec![matrices, recon]
}

/// `M_d⁻¹ M_d = I` for every size `d` at class count `k`.
pub fn verify_mcl_blocks(k: usize, tol: f64) -> CheckReport {
    CheckReport::run("mcl_block_identity", "MCL", json!({ "K": k }), tol, 0, || {
        let mut err = 0.0f64;
        for d in 1..k {
            let prod = mcl_block_inverse(k, d)?.mul(&mcl_block(k, d)?)?;
            err = err.max(prod.max_abs_diff(&Matrix::identity(k)));
        }
        Ok(err)
    })
}

fn pair_symmetry_error(kind: PairKind, j: &FiniteJoint, rng: &mut ChaCha8Rng) -> Result<f64> {
    let pd = pair_distribution(kind, j)?;
    let n = j.n_x();
    let mut err = 0.0f64;
    for _ in 0..10 {
        let h: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (mut left, mut right) = (0.0, 0.0);
        for a in 0..n {
            for b in 0..n {
                left += pd.matrix[(a, b)] * h[a];
                right += pd.matrix[(a, b)] * h[b];
            }
        }
        err = err.max((left - right).abs());
    }
    Ok(err)
}

fn pcomp_marginal_error(j: &FiniteJoint) -> Result<f64> {
    let pd = pair_distribution(PairKind::Pcomp, j)?;
    let cm = observed_distribution(&ScenarioSpec::Pcomp {}, j)?;
    let rows = pd.row_sums();
    let cols = pd.col_sums();
    let mut err = 0.0f64;
    for i in 0..j.n_x() {
        err = err.max((rows[i] - cm.corr_p[i][0]).abs()).max((cols[i] - cm.corr_p[i][1]).abs());
    }
    Ok(err)
}

/// Generic `Lᵀ M†` against the hand-derived corrected losses.
pub fn closed_form_error(spec: &ScenarioSpec, j: &FiniteJoint, model: &LinearModel, ls: LossSpec) -> Result<f64> {
    let method = match spec {
        ScenarioSpec::Cl {} | ScenarioSpec::Mcl { .. } => Method::Inversion,
        _ => Method::Auto,
    };
    let cm = observed_distribution(spec, j)?;
    let dr = decontaminate_model(&cm, j, method)?;
    let m = marginals(j)?;
    let l = loss_table(j, model, ls)?;
    let n = j.n_x();
    let mut err = 0.0f64;
    for (p, md) in dr.mdagger.iter().enumerate() {
        let i = if cm.family == Family::Sconf { p / n } else { p };
        let generic = corrected_losses(&l[i], md)?;
        let closed = closed_form_corrected_loss(spec, &m, p, &l[i])?;
        err = err.max(max_abs_diff(&generic, &closed));
    }
    Ok(err)
}

fn ppl_closed_form_error(spec: &ScenarioSpec, j: &FiniteJoint) -> Result<f64> {
    let cm = observed_distribution(spec, j)?;
    let m = marginals(j)?;
    let mut err = 0.0f64;
    for i in 0..j.n_x() {
        let chain = decontaminate_marginal_chain(spec, j, i)?;
        let closed = ppl_closed_form(&m, i)?;
        for c in 0..chain.cols() {
            if cm.corr_p[i][c] == 0.0 {
                continue;
            }
            for k in 0..j.k() {
                err = err.max((chain[(k, c)] - closed[(k, c)]).abs());
            }
        }
    }
    Ok(err)
}

fn mc_exact_and_estimate(
    spec: &ScenarioSpec,
    j: &FiniteJoint,
    model: &LinearModel,
    ls: LossSpec,
    n: usize,
    seed: u64,
) -> Result<(f64, f64, f64)> {
    let ds = sample_weak_dataset(spec, j, &SampleSizes::Total(n), seed)?;
    let obj = EmpiricalObjective::build(&ds, j, Method::Auto)?;
    let (est, se) = obj.risk_with_se(j, model, ls)?;
    Ok((classification_risk(j, model, ls)?, est, se))
}

/// `|R̂ − R| ≤ 5 SE`, plus a bit-identical rerun.
pub fn verify_monte_carlo(spec: &ScenarioSpec, j: &FiniteJoint, model: &LinearModel, ls: LossSpec, n: usize, seed: u64) -> Vec<CheckReport> {
    let mut params = spec_params(spec, j);
    params["n"] = json!(n);
    params["loss"] = json!(ls.as_str());
    let t = Instant::now();
    let first = mc_exact_and_estimate(spec, j, model, ls, n, seed);
    let elapsed_s = t.elapsed().as_secs_f64();
    let consistency = match &first {
        Ok((exact, est, se)) => CheckReport {
            name: "monte_carlo".into(),
            scenario: spec.name().into(),
            params: params.clone(),
            max_abs_err: Some((est - exact).abs()),
            tol: MC_STANDARD_ERRORS * se,
            pass: (est - exact).abs() <= MC_STANDARD_ERRORS * se,
            seed,
            elapsed_s,
            error: None,
        },
        Err(e) => {
            let e = e.clone();
            CheckReport::run("monte_carlo", spec.name(), params.clone(), 0.0, seed, move || Err(e))
        }
    };
    let rerun = CheckReport::run("monte_carlo_determinism", spec.name(), params, 0.0, seed, || {
        let (_, a, _) = first.clone()?;
        let (_, b, _) = mc_exact_and_estimate(spec, j, model, ls, n, seed)?;
        Ok(if a.to_bits() == b.to_bits() { 0.0 } else { (a - b).abs().max(f64::MIN_POSITIVE) })
    });
    vec![consistency, rerun]
}

/// Analytic against central-difference gradients of the empirical corrected
/// risk with an L2 term.
pub fn verify_gradient(spec: &ScenarioSpec, j: &FiniteJoint, n: usize, seed: u64, tol: f64) -> CheckReport {
    let mut params = spec_params(spec, j);
    params["n"] = json!(n);
    CheckReport::run("gradient", spec.name(), params, tol, seed, || {
        let ds = sample_weak_dataset(spec, j, &SampleSizes::Total(n), seed)?;
        let obj = EmpiricalObjective::build(&ds, j, Method::Auto)?;
        let model = random_model(j.k(), j.d_feat(), 0.5, seed ^ 0x5eed);
        let a = empirical_gradient(&obj, j, &model, LossSpec::Logistic, 0.01)?;
        let f = finite_difference_gradient(&obj, j, &model, LossSpec::Logistic, 0.01, FD_EPS)?;
        Ok(relative_gradient_error(&a, &f))
    })
}

/// Joint built from uniform draws, floored away from zero and normalized.
pub fn random_joint(k: usize, nx: usize, rng: &mut ChaCha8Rng) -> Result<FiniteJoint> {
    let features = (0..nx).map(|_| (0..FEATURE_DIM).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    let raw: Vec<Vec<f64>> = (0..k).map(|_| (0..nx).map(|_| 0.02 + rng.gen::<f64>()).collect()).collect();
    let total: f64 = raw.iter().flatten().sum();
    FiniteJoint::new(k, features, raw.into_iter().map(|r| r.into_iter().map(|v| v / total).collect()).collect())
}

fn random_simplex(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| 0.02 + rng.gen::<f64>()).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / total).collect()
}

/// Proper `C(s, x)` at one instance: a random convex mix of partition
/// schemes and an MCL-type scheme.
fn random_proper_column(k: usize, labels: &[Vec<usize>], rng: &mut ChaCha8Rng) -> Vec<f64> {
    let schemes = 3;
    let w = random_simplex(schemes, rng);
    let mut col = vec![0.0; labels.len()];
    for &ws in &w[..schemes - 1] {
        let blocks = loop {
            let nb = rng.gen_range(2..=k);
            let ids: Vec<usize> = (0..k).map(|_| rng.gen_range(0..nb)).collect();
            let mut used: Vec<usize> = ids.clone();
            used.sort_unstable();
            used.dedup();
            if used.len() >= 2 {
                break used.iter().map(|b| (0..k).filter(|&c| ids[c] == *b).collect::<Vec<_>>()).collect::<Vec<_>>();
            }
        };
        for b in blocks {
            let pos = labels.iter().position(|s| *s == b).expect("block is a strict subset");
            col[pos] += ws;
        }
    }
    let q = random_simplex(k - 1, rng);
    for (c, s) in labels.iter().enumerate() {
        let d = k - s.len();
        col[c] += w[schemes - 1] * q[d - 1] / binomial(k - 1, d);
    }
    col
}

/// Seeded parameters for the named scenario.
pub fn random_spec(name: &str, k: usize, nx: usize, rng: &mut ChaCha8Rng) -> Result<ScenarioSpec> {
    let spec = match name {
        "MCD" => ScenarioSpec::Mcd { gamma_p: rng.gen_range(0.0..0.4), gamma_n: rng.gen_range(0.0..0.4) },
        "UU" => ScenarioSpec::Uu { gamma_1: rng.gen_range(0.0..0.4), gamma_2: rng.gen_range(0.0..0.4) },
        "CCN" => ScenarioSpec::Ccn {
            flip: (0..nx)
                .map(|_| {
                    let (e0, e1) = (rng.gen_range(0.0..0.4), rng.gen_range(0.0..0.4));
                    [[1.0 - e0, e1], [e0, 1.0 - e1]]
                })
                .collect(),
        },
        "GCCN" => {
            let labels = compound_label_space(k)?.len();
            ScenarioSpec::Gccn {
                cond: (0..nx)
                    .map(|_| {
                        let cols: Vec<Vec<f64>> = (0..k).map(|_| random_simplex(labels, rng)).collect();
                        (0..labels).map(|s| (0..k).map(|c| cols[c][s]).collect()).collect()
                    })
                    .collect(),
            }
        }
        "PPL" => {
            let labels = compound_label_space(k)?;
            let cols: Vec<Vec<f64>> = (0..nx).map(|_| random_proper_column(k, &labels, rng)).collect();
            ScenarioSpec::Ppl { c: (0..labels.len()).map(|s| (0..nx).map(|i| cols[i][s]).collect()).collect() }
        }
        "MCL" => ScenarioSpec::Mcl { q: random_simplex(k - 1, rng) },
        "SubConf" => {
            let y_s = loop {
                let pick: Vec<usize> = (1..=k).filter(|_| rng.gen_bool(0.5)).collect();
                if !pick.is_empty() && pick.len() < k {
                    break pick;
                }
            };
            ScenarioSpec::SubConf { y_s }
        }
        "SCConf" => ScenarioSpec::ScConf { y_s: rng.gen_range(1..=k) },
        other => ScenarioSpec::from_name(other, json!({}))?,
    };
    Ok(spec)
}

fn admissible(spec: &ScenarioSpec, j: &FiniteJoint) -> bool {
    if observed_distribution(spec, j).is_err() || decontaminate(spec, j, Method::Auto).is_err() {
        return false;
    }
    let Ok(m) = marginals(j) else { return false };
    if spec.needs_unbalanced_priors() && (m.priors[0] - 0.5).abs() < PRIOR_MARGIN {
        return false;
    }
    if matches!(spec, ScenarioSpec::Sconf {}) {
        let (pp, pn) = (m.priors[0], m.priors[1]);
        for a in 0..j.n_x() {
            for b in 0..j.n_x() {
                match sconf_confidence(&m, a, b) {
                    Ok(r) if (r - pn).abs() >= SCONF_MARGIN && (pp - r).abs() >= SCONF_MARGIN => {}
                    _ => return false,
                }
            }
        }
    }
    true
}

/// Seeded scenario instance, redrawing joints that violate the scenario's
/// preconditions.
pub fn random_instance(name: &str, k: usize, nx: usize, seed: u64) -> Result<(ScenarioSpec, FiniteJoint)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..MAX_REJECTIONS {
        let spec = random_spec(name, k, nx, &mut rng)?;
        let j = random_joint(k, nx, &mut rng)?;
        if admissible(&spec, &j) {
            return Ok((spec, j));
        }
    }
    Err(Error::InvalidParams(format!("no admissible {name} joint with K = {k}, n_x = {nx}")))
}

/// Methods whose reconstruction is defined for `spec` at `k` classes.
pub fn applicable_methods(spec: &ScenarioSpec, k: usize) -> Vec<Method> {
    match spec.family() {
        Family::Mcd => vec![Method::Inversion],
        Family::Sconf => vec![Method::Auto],
        Family::Conf => vec![Method::Auto, Method::Inversion],
        Family::Ccn => match spec {
            ScenarioSpec::Ccn { .. } | ScenarioSpec::Cl {} | ScenarioSpec::Mcl { .. } => {
                vec![Method::MarginalChain, Method::Inversion]
            }
            ScenarioSpec::Ppl { .. } | ScenarioSpec::Pcpl {} if k == 2 => vec![Method::MarginalChain, Method::Inversion],
            _ => vec![Method::MarginalChain],
        },
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyConfig {
    /// Largest class count used for multiclass scenarios.
    pub k: usize,
    /// Largest instance count.
    pub nx: usize,
    pub trials: usize,
    pub seed: u64,
    pub scenarios: Vec<String>,
    pub mutation: Mutation,
    pub mc_samples: usize,
    pub gradient_samples: usize,
    pub gradient_trials: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            k: 4,
            nx: 6,
            trials: 20,
            seed: 7,
            scenarios: ScenarioSpec::NAMES.iter().map(|s| s.to_string()).collect(),
            mutation: Mutation::None,
            mc_samples: 100_000,
            gradient_samples: 50,
            gradient_trials: 2,
        }
    }
}

impl VerifyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(2..=K_MAX).contains(&self.k) {
            return Err(Error::InvalidParams(format!("K must be in 2..={K_MAX}, got {}", self.k)));
        }
        if self.nx < 3 {
            return Err(Error::InvalidParams(format!("n_x must be at least 3, got {}", self.nx)));
        }
        for s in &self.scenarios {
            if !ScenarioSpec::NAMES.contains(&s.as_str()) {
                return Err(Error::InvalidParams(format!("unknown scenario {s:?}")));
            }
        }
        Ok(())
    }

    fn shape(&self, spec_name: &str, trial: usize) -> (usize, usize) {
        let binary = matches!(
            spec_name,
            "MCD" | "UU" | "PU" | "SU" | "DU" | "SD" | "Pcomp" | "Sconf" | "CCN" | "Pconf"
        );
        let k = if binary { 2 } else { 2 + trial % (self.k - 1) };
        let nx = 3 + trial % (self.nx - 2);
        (k, nx)
    }
}

/// SplitMix64 finalizer over a combined key.
pub fn derive_seed(base: u64, a: u64, b: u64) -> u64 {
    let mut z = base ^ a.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ b.wrapping_mul(0xd1b5_4a32_d192_ed03);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn scenario_trial_checks(cfg: &VerifyConfig, name: &str, trial: usize) -> Vec<CheckReport> {
    let idx = ScenarioSpec::NAMES.iter().position(|n| *n == name).unwrap_or(usize::MAX) as u64;
    let seed = derive_seed(cfg.seed, idx, trial as u64);
    let (k, nx) = cfg.shape(name, trial);
    let (spec, j) = match random_instance(name, k, nx, seed) {
        Ok(x) => x,
        Err(e) => {
            let params = json!({ "K": k, "n_x": nx });
            return vec![CheckReport::run("instance", name, params, 0.0, seed, || Err(e))];
        }
    };
    scenario_checks(&spec, &j, seed, cfg.mutation)
}

/// Every per-scenario check on one joint: reconstruction and risk equality
/// for each applicable method, then the scenario's own identities.
pub fn scenario_checks(spec: &ScenarioSpec, j: &FiniteJoint, seed: u64, mutation: Mutation) -> Vec<CheckReport> {
    let (spec, j) = (spec.clone(), j.clone());
    let k = j.k();
    let model = random_model(k, j.d_feat(), 1.0, seed ^ 1);
    let ls = LossSpec::Logistic;
    let mut out = Vec::new();
    let methods = applicable_methods(&spec, k);
    for &method in &methods {
        out.push(verify_reconstruction_with(&spec, &j, method, MATRIX_TOL).with_seed(seed));
    }
    for &method in &methods {
        out.push(verify_risk_equality_with(&spec, &j, &model, ls, method, mutation, RISK_TOL).with_seed(seed));
    }
    let params = spec_params(&spec, &j);
    let run = |name: &str, tol: f64, f: &dyn Fn() -> Result<f64>| CheckReport::run(name, spec.name(), params.clone(), tol, seed, f);
    match &spec {
        ScenarioSpec::Sconf {} => {
            out.push(run("sconf_mixing", MATRIX_TOL, &|| sconf_mixing_error(&observed_distribution(&spec, &j)?, &j)));
            out.push(run("sconf_x_only", RISK_TOL, &|| {
                Ok((sconf_rewritten_risk_x_only(&j, &model, ls)? - classification_risk(&j, &model, ls)?).abs())
            }));
        }
        ScenarioSpec::Su {} | ScenarioSpec::Du {} | ScenarioSpec::Sd {} | ScenarioSpec::Pcomp {} => {
            out.push(run("pairwise_rewrite", RISK_TOL, &|| {
                Ok((pairwise_rewritten_risk(&spec, &j, &model, ls)? - classification_risk(&j, &model, ls)?).abs())
            }));
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 2);
            match &spec {
                ScenarioSpec::Pcomp {} => out.push(run("pcomp_marginals", MATRIX_TOL, &|| pcomp_marginal_error(&j))),
                _ => {
                    for kind in [PairKind::Similar, PairKind::Dissimilar] {
                        let e = pair_symmetry_error(kind, &j, &mut rng);
                        out.push(run(if kind == PairKind::Similar { "pair_symmetry_s" } else { "pair_symmetry_d" }, MATRIX_TOL, &|| e.clone()));
                    }
                }
            }
        }
        ScenarioSpec::Pcpl {} => {
            out.push(run("pcpl_half_identity", MATRIX_TOL, &|| {
                let (lhs, rhs) = pcpl_half_identity(&j, &model, ls)?;
                Ok((lhs - rhs).abs())
            }));
            out.push(run("ppl_closed_form", PPL_CLOSED_FORM_TOL, &|| ppl_closed_form_error(&spec, &j)));
        }
        ScenarioSpec::Ppl { .. } => {
            out.push(run("ppl_closed_form", PPL_CLOSED_FORM_TOL, &|| ppl_closed_form_error(&spec, &j)));
        }
        ScenarioSpec::Mcl { .. } | ScenarioSpec::Cl {} => {
            out.push(run("mcl_method_agreement", RISK_TOL, &|| {
                let inv = rewritten_risk_mutated(&spec, &j, &model, ls, Method::Inversion, Mutation::None)?;
                let chain = rewritten_risk_mutated(&spec, &j, &model, ls, Method::MarginalChain, Mutation::None)?;
                Ok((inv - chain).abs())
            }));
        }
        _ => {}
    }
    if !matches!(spec, ScenarioSpec::Mcd { .. } | ScenarioSpec::Ccn { .. } | ScenarioSpec::Gccn { .. }) {
        out.push(run("closed_form", MATRIX_TOL, &|| closed_form_error(&spec, &j, &model, ls)));
    }
    out
}

type Task = Box<dyn Fn() -> Vec<CheckReport> + Send + Sync>;

fn build_tasks(cfg: &VerifyConfig) -> Vec<Task> {
    let mut tasks: Vec<Task> = Vec::new();
    if cfg.trials == 0 || cfg.scenarios.is_empty() {
        return tasks;
    }
    let has = |n: &str| cfg.scenarios.iter().any(|s| s == n);
    for name in ScenarioSpec::NAMES.iter().filter(|n| has(n)) {
        for trial in 0..cfg.trials {
            let c = cfg.clone();
            tasks.push(Box::new(move || scenario_trial_checks(&c, name, trial)));
        }
    }
    for trial in 0..cfg.trials {
        let c = cfg.clone();
        tasks.push(Box::new(move || {
            let wanted = |child: &str| c.scenarios.iter().any(|s| s == child);
            let mut out = Vec::new();
            for (kk, salt) in [(2usize, 0u64), (2 + trial % (c.k - 1).max(1), 1)] {
                if kk == 2 && salt == 1 {
                    continue;
                }
                let seed = derive_seed(c.seed, 1000 + salt, trial as u64);
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let nx = 3 + trial % (c.nx - 2);
                let Ok(j) = random_joint(kk, nx, &mut rng) else { continue };
                out.extend(
                    verify_reduction_graph(&j, seed, REDUCTION_TOL)
                        .into_iter()
                        .filter(|r| wanted(&r.scenario) && (salt == 0 || r.params["K"] != json!(2))),
                );
            }
            out
        }));
    }
    if has("MCL") || has("CL") {
        tasks.push(Box::new(|| (2..=6).map(|k| verify_mcl_blocks(k, MATRIX_TOL)).collect()));
    }
    if has("CL") {
        let seed = derive_seed(cfg.seed, 2000, 0);
        tasks.push(Box::new(move || verify_worked_example_seeded(seed)));
    }
    for name in ScenarioSpec::NAMES.iter().filter(|n| has(n)) {
        let c = cfg.clone();
        tasks.push(Box::new(move || {
            let idx = ScenarioSpec::NAMES.iter().position(|n| n == name).unwrap_or(0) as u64;
            let seed = derive_seed(c.seed, 3000 + idx, 0);
            let (k, nx) = c.shape(name, 0);
            match random_instance(name, k, nx, seed) {
                Ok((spec, j)) => {
                    let model = random_model(k, j.d_feat(), 1.0, seed ^ 1);
                    verify_monte_carlo(&spec, &j, &model, LossSpec::Logistic, c.mc_samples, seed)
                }
                Err(e) => vec![CheckReport::run("monte_carlo", name, json!({ "K": k, "n_x": nx }), 0.0, seed, || Err(e))],
            }
        }));
    }
    for name in ScenarioSpec::NAMES.iter().filter(|n| has(n)) {
        for trial in 0..cfg.gradient_trials.min(cfg.trials) {
            let c = cfg.clone();
            tasks.push(Box::new(move || {
                let idx = ScenarioSpec::NAMES.iter().position(|n| n == name).unwrap_or(0) as u64;
                let seed = derive_seed(c.seed, 4000 + idx, trial as u64);
                let (k, nx) = c.shape(name, trial);
                match random_instance(name, k, nx, seed) {
                    Ok((spec, j)) => vec![verify_gradient(&spec, &j, c.gradient_samples, seed, GRADIENT_TOL)],
                    Err(e) => vec![CheckReport::run("gradient", name, json!({ "K": k, "n_x": nx }), 0.0, seed, || Err(e))],
                }
            }));
        }
    }
    tasks
}

fn thread_cap() -> Option<usize> {
    std::env::var("WSLRR_THREADS").ok()?.trim().parse().ok().filter(|&n| n > 0)
}

/// Runs the whole registry. Checks run in parallel; the report keeps
/// registry order.
pub fn verify_all(cfg: &VerifyConfig) -> Report {
    if let Err(e) = cfg.validate() {
        let bad = CheckReport::run("config", "", Value::Null, 0.0, cfg.seed, || Err(e));
        return Report::new(cfg.seed, vec![bad]);
    }
    let tasks = build_tasks(cfg);
    let run = || tasks.par_iter().map(|t| t()).collect::<Vec<_>>();
    let results = match thread_cap().and_then(|n| rayon::ThreadPoolBuilder::new().num_threads(n).build().ok()) {
        Some(pool) => pool.install(run),
        None => run(),
    };
    Report::new(cfg.seed, results.into_iter().flatten().collect())
}
