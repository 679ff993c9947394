//! Decontamination matrices `M†` with `M† corrP = P`.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::joint::{marginals, FiniteJoint, Marginals};
use crate::linalg::{binomial, max_abs_diff, Matrix};
use crate::scenarios::{
    compound_label_space, confidence_mass, observed_distribution, sconf_confidence,
    sconf_tilde_integrand, subsets_of_size, ContaminationModel, Family, ScenarioSpec,
    DEGENERACY_TOL,
};

/// How a decontamination matrix was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodTag {
    Inversion,
    MarginalChain,
    SconfSpecial,
    MclBlockwise,
}

/// User-facing method choice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Inversion,
    MarginalChain,
    #[default]
    Auto,
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "inversion" => Ok(Method::Inversion),
            "marginal-chain" => Ok(Method::MarginalChain),
            "auto" => Ok(Method::Auto),
            other => Err(Error::InvalidParams(format!("unknown method {other:?}"))),
        }
    }
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Inversion => "inversion",
            Method::MarginalChain => "marginal-chain",
            Method::Auto => "auto",
        }
    }
}

/// Per-instance `M†(x)` (`K × m`). For Sconf the entries are the per-pair
/// 2x2 diagonals, indexed `i * n_x + i'`.
#[derive(Debug, Clone, PartialEq)]
pub struct DecontaminationResult {
    pub method: MethodTag,
    pub mdagger: Vec<Matrix>,
}

/// Runs the requested method over every instance.
pub fn decontaminate(spec: &ScenarioSpec, j: &FiniteJoint, method: Method) -> Result<DecontaminationResult> {
    let cm = observed_distribution(spec, j)?;
    decontaminate_model(&cm, j, method)
}

pub fn decontaminate_model(cm: &ContaminationModel, j: &FiniteJoint, method: Method) -> Result<DecontaminationResult> {
    let spec = &cm.spec;
    let n = j.n_x();
    let wrong = |m: Method| Error::WrongFamily { method: m.as_str().into(), scenario: spec.name().into() };
    match (cm.family, method) {
        (Family::Sconf, Method::Auto) => {
            let m = marginals(j)?;
            let mut out = Vec::with_capacity(n * n);
            for a in 0..n {
                for b in 0..n {
                    out.push(sconf_decontamination(m.priors[0], sconf_confidence(&m, a, b)?)?);
                }
            }
            Ok(DecontaminationResult { method: MethodTag::SconfSpecial, mdagger: out })
        }
        (Family::Sconf, other) => Err(wrong(other)),
        (Family::Ccn, Method::Auto | Method::MarginalChain) => Ok(DecontaminationResult {
            method: MethodTag::MarginalChain,
            mdagger: (0..n).map(|i| decontaminate_marginal_chain(spec, j, i)).collect::<Result<_>>()?,
        }),
        (_, Method::MarginalChain) => Err(wrong(Method::MarginalChain)),
        (Family::Conf, Method::Auto) => {
            let m = marginals(j)?;
            Ok(DecontaminationResult {
                method: MethodTag::Inversion,
                mdagger: (0..n).map(|i| conf_diagonal_inverse(spec, &m, i)).collect::<Result<_>>()?,
            })
        }
        (Family::Ccn, Method::Inversion) if matches!(spec, ScenarioSpec::Mcl { .. } | ScenarioSpec::Cl {}) => {
            let inv = match spec {
                ScenarioSpec::Cl {} => mcl_block_inverse(j.k(), 1)?,
                _ => mcl_inverse(spec, j.k())?,
            };
            Ok(DecontaminationResult { method: MethodTag::MclBlockwise, mdagger: vec![inv; n] })
        }
        _ => Ok(DecontaminationResult {
            method: MethodTag::Inversion,
            mdagger: (0..n).map(|i| decontaminate_inversion(cm, i)).collect::<Result<_>>()?,
        }),
    }
}

/// `(M(x) M_trsf(x))⁻¹`; for the MCD family this is `Π M⁻¹`.
pub fn decontaminate_inversion(cm: &ContaminationModel, i: usize) -> Result<Matrix> {
    if cm.family == Family::Sconf {
        return Err(Error::WrongFamily { method: "inversion".into(), scenario: "Sconf".into() });
    }
    let m = cm.m.get(i).ok_or(Error::IndexOutOfRange { index: i, len: cm.m.len() })?;
    m.mul(&cm.m_trsf[i])?.inverse()
}

/// Entry `(k, j) = P(Y = k | S = s_j, x)`; zero-mass channels get zero columns.
pub fn decontaminate_marginal_chain(spec: &ScenarioSpec, j: &FiniteJoint, i: usize) -> Result<Matrix> {
    if spec.family() != Family::Ccn {
        return Err(Error::WrongFamily { method: "marginal-chain".into(), scenario: spec.name().into() });
    }
    let m = marginals(j)?;
    let mm = crate::scenarios::contamination_matrix(spec, &m, i)?;
    let p = j.risk_vector(i)?;
    let corr = mm.mul_vec(&p)?;
    let mut out = Matrix::zeros(j.k(), mm.rows());
    for (c, &mass) in corr.iter().enumerate() {
        if mass == 0.0 {
            continue;
        }
        for k in 0..j.k() {
            out[(k, c)] = mm[(c, k)] * p[k] / mass;
        }
    }
    Ok(out)
}

/// Closed form of the marginal chain for proper partial labels:
/// `r_k 1{k ∈ s} / Σ_{a ∈ s} r_a`.
pub fn ppl_closed_form(m: &Marginals, i: usize) -> Result<Matrix> {
    let k = m.k();
    let labels = compound_label_space(k)?;
    let r = m.r(i);
    let mut out = Matrix::zeros(k, labels.len());
    for (c, s) in labels.iter().enumerate() {
        let z: f64 = s.iter().map(|&a| r[a]).sum();
        if z == 0.0 {
            continue;
        }
        for &kk in s {
            out[(kk, c)] = r[kk] / z;
        }
    }
    Ok(out)
}

/// Complementary closed form for MCL: `r_k 1{k ∉ s̄} / Σ_{a ∉ s̄} r_a` over
/// the compound-label space (CL uses the singleton block).
pub fn complementary_closed_form(m: &Marginals, i: usize, singletons_only: bool) -> Result<Matrix> {
    let k = m.k();
    let labels = if singletons_only { subsets_of_size(k, 1) } else { compound_label_space(k)? };
    let r = m.r(i);
    let mut out = Matrix::zeros(k, labels.len());
    for (c, s) in labels.iter().enumerate() {
        let z: f64 = (0..k).filter(|a| !s.contains(a)).map(|a| r[a]).sum();
        if z == 0.0 {
            continue;
        }
        for kk in (0..k).filter(|a| !s.contains(a)) {
            out[(kk, c)] = r[kk] / z;
        }
    }
    Ok(out)
}

/// `K × N_d` block with entry `1 − ((K−1)/d) 1{i ∈ s_{d,j}}`.
pub fn mcl_block_inverse(k: usize, d: usize) -> Result<Matrix> {
    if d == 0 || d >= k {
        return Err(Error::BadSize { k, d });
    }
    let sets = subsets_of_size(k, d);
    let f = (k - 1) as f64 / d as f64;
    let mut out = Matrix::zeros(k, sets.len());
    for (c, s) in sets.iter().enumerate() {
        for i in 0..k {
            out[(i, c)] = if s.contains(&i) { 1.0 - f } else { 1.0 };
        }
    }
    Ok(out)
}

/// `N_d × K` block of the size-`d` complementary labels with `q_d = 1`.
pub fn mcl_block(k: usize, d: usize) -> Result<Matrix> {
    if d == 0 || d >= k {
        return Err(Error::BadSize { k, d });
    }
    let sets = subsets_of_size(k, d);
    let w = 1.0 / binomial(k - 1, d);
    let mut out = Matrix::zeros(sets.len(), k);
    for (c, s) in sets.iter().enumerate() {
        for i in (0..k).filter(|i| !s.contains(i)) {
            out[(c, i)] = w;
        }
    }
    Ok(out)
}

/// `[M_1⁻¹ M_2⁻¹ … M_{K−1}⁻¹]`, aligned with the compound-label order.
pub fn mcl_inverse(spec: &ScenarioSpec, k: usize) -> Result<Matrix> {
    let ScenarioSpec::Mcl { q } = spec else {
        return Err(Error::WrongFamily { method: "mcl-blockwise".into(), scenario: spec.name().into() });
    };
    if q.len() != k - 1 {
        return Err(Error::ShapeMismatch(format!("q must have {} entries", k - 1)));
    }
    let total = compound_label_space(k)?.len();
    let mut out = Matrix::zeros(k, total);
    let mut col = 0;
    for d in 1..k {
        let b = mcl_block_inverse(k, d)?;
        for c in 0..b.cols() {
            for i in 0..k {
                out[(i, col + c)] = b[(i, c)];
            }
        }
        col += b.cols();
    }
    Ok(out)
}

/// `diag((r − π_n)/(π_p − π_n), (π_p − r)/(π_p − π_n))`.
pub fn sconf_decontamination(pi_p: f64, r: f64) -> Result<Matrix> {
    if (pi_p - 0.5).abs() <= DEGENERACY_TOL {
        return Err(Error::DegenerateParams("pi_p = 1/2".into()));
    }
    let pi_n = 1.0 - pi_p;
    let z = pi_p - pi_n;
    Ok(Matrix::diag(&[(r - pi_n) / z, (pi_p - r) / z]))
}

/// `diag(r_k(x) / r_{Y_s}(x))`; Soft uses `r_{Y_s} ≡ 1`.
pub fn conf_diagonal_inverse(spec: &ScenarioSpec, m: &Marginals, i: usize) -> Result<Matrix> {
    if i >= m.n_x() {
        return Err(Error::IndexOutOfRange { index: i, len: m.n_x() });
    }
    let r = m.r(i);
    let rs = confidence_mass(spec, &r)?;
    if rs == 0.0 {
        let k = match spec {
            ScenarioSpec::SubConf { y_s } => y_s[0] - 1,
            ScenarioSpec::ScConf { y_s } => y_s - 1,
            _ => 0,
        };
        return Err(Error::ZeroConfidence { k, i });
    }
    Ok(Matrix::diag(&r.iter().map(|rk| rk / rs).collect::<Vec<_>>()))
}

/// `max_x ‖M†(x) corrP(x) − P(x)‖∞`. For Sconf the per-instance identity
/// `Σ_{x'} M̃†(x,x') M̃(x,x') = I` is measured instead.
pub fn reconstruction_error(cm: &ContaminationModel, dr: &DecontaminationResult, j: &FiniteJoint) -> Result<f64> {
    let n = j.n_x();
    let mut worst = 0.0f64;
    if cm.family == Family::Sconf {
        let m = marginals(j)?;
        for a in 0..n {
            let mut acc = Matrix::zeros(2, 2);
            for b in 0..n {
                let prod = dr.mdagger[a * n + b].mul(&sconf_tilde_integrand(&m, a, b)?)?;
                for r in 0..2 {
                    for c in 0..2 {
                        acc[(r, c)] += prod[(r, c)];
                    }
                }
            }
            worst = worst.max(acc.max_abs_diff(&Matrix::identity(2)));
        }
        return Ok(worst);
    }
    for i in 0..n {
        let rec = dr.mdagger[i].mul_vec(&cm.corr_p[i])?;
        worst = worst.max(max_abs_diff(&rec, &j.risk_vector(i)?));
    }
    Ok(worst)
}

/// `max_x ‖M_Sconf(x,x') B(x) − P(x)P(x') 1‖∞` over all pairs.
pub fn sconf_mixing_error(cm: &ContaminationModel, j: &FiniteJoint) -> Result<f64> {
    if cm.family != Family::Sconf {
        return Err(Error::WrongFamily { method: "sconf-special".into(), scenario: cm.spec.name().into() });
    }
    let n = j.n_x();
    let mut worst = 0.0f64;
    for a in 0..n {
        for b in 0..n {
            let target = j.instance_mass(a) * j.instance_mass(b);
            for v in &cm.corr_p[a * n + b] {
                worst = worst.max((v - target).abs());
            }
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn joint(k: usize, cols: &[&[f64]]) -> FiniteJoint {
        let n = cols.len();
        let rows = (0..k).map(|kk| cols.iter().map(|c| c[kk]).collect()).collect();
        FiniteJoint::new(k, (0..n).map(|i| vec![i as f64]).collect(), rows).unwrap()
    }

    #[test]
    fn pu_inversion() {
        let j = joint(2, &[&[0.3, 0.2], &[0.1, 0.4]]);
        let dr = decontaminate(&ScenarioSpec::Pu {}, &j, Method::Auto).unwrap();
        let expect = Matrix::from_rows(&[vec![0.4, 0.0], vec![-0.4, 1.0]]);
        assert!(dr.mdagger[0].max_abs_diff(&expect) < 1e-15);
        let cm = observed_distribution(&ScenarioSpec::Pu {}, &j).unwrap();
        assert!(reconstruction_error(&cm, &dr, &j).unwrap() < 1e-15);
    }

    #[test]
    fn identity_contamination() {
        let j = joint(2, &[&[0.3, 0.2], &[0.1, 0.4]]);
        let spec = ScenarioSpec::Uu { gamma_1: 0.0, gamma_2: 0.0 };
        let cm = observed_distribution(&spec, &j).unwrap();
        let dr = decontaminate_model(&cm, &j, Method::Inversion).unwrap();
        let t_inv = cm.m_trsf[0].inverse().unwrap();
        assert!(dr.mdagger[0].max_abs_diff(&t_inv) < 1e-15);
    }

    #[test]
    fn cl_inverse_entries() {
        let j = joint(4, &[&[0.1, 0.2, 0.3, 0.4]]);
        let dr = decontaminate(&ScenarioSpec::Cl {}, &j, Method::Inversion).unwrap();
        assert_eq!(dr.method, MethodTag::MclBlockwise);
        for a in 0..4 {
            for b in 0..4 {
                assert_eq!(dr.mdagger[0][(a, b)], if a == b { -2.0 } else { 1.0 });
            }
        }
    }

    #[test]
    fn marginal_chain_cases() {
        let j = joint(4, &[&[0.25, 0.25, 0.25, 0.25]]);
        let mc = decontaminate_marginal_chain(&ScenarioSpec::Cl {}, &j, 0).unwrap();
        for a in 0..4 {
            for b in 0..4 {
                let want = if a == b { 0.0 } else { 1.0 / 3.0 };
                assert!((mc[(a, b)] - want).abs() < 1e-15);
            }
        }
        let j = joint(3, &[&[0.5, 0.3, 0.2]]);
        let m = marginals(&j).unwrap();
        let pc = ppl_closed_form(&m, 0).unwrap();
        // s = {1,2} is channel 3 in canonical order.
        assert!((pc[(0, 3)] - 0.625).abs() < 1e-15);
        assert!((pc[(1, 3)] - 0.375).abs() < 1e-15);
        assert_eq!(pc[(2, 3)], 0.0);
        let e = decontaminate_marginal_chain(&ScenarioSpec::Pu {}, &joint(2, &[&[0.5, 0.5]]), 0).unwrap_err();
        assert!(matches!(e, Error::WrongFamily { .. }));
    }

    #[test]
    fn zero_mass_channel_gets_zero_column() {
        let j = joint(3, &[&[0.5, 0.3, 0.2]]);
        let spec = ScenarioSpec::Mcl { q: vec![1.0, 0.0] };
        let mc = decontaminate_marginal_chain(&spec, &j, 0).unwrap();
        for c in 3..6 {
            assert!(mc.col(c).iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn block_inverses() {
        let b = mcl_block_inverse(4, 1).unwrap();
        for a in 0..4 {
            for c in 0..4 {
                assert_eq!(b[(a, c)], if a == c { -2.0 } else { 1.0 });
            }
        }
        let b = mcl_block_inverse(3, 2).unwrap();
        assert!(b.to_rows().iter().flatten().all(|&v| v == 0.0 || v == 1.0));
        let p = b.mul(&mcl_block(3, 2).unwrap()).unwrap();
        assert!(p.max_abs_diff(&Matrix::identity(3)) < 1e-15);
        assert_eq!(mcl_block_inverse(3, 3).unwrap_err(), Error::BadSize { k: 3, d: 3 });
        let inv = mcl_inverse(&ScenarioSpec::Mcl { q: vec![0.5, 0.5] }, 3).unwrap();
        assert_eq!((inv.rows(), inv.cols()), (3, 6));
        let inv2 = mcl_inverse(&ScenarioSpec::Mcl { q: vec![1.0] }, 2).unwrap();
        assert_eq!((inv2.rows(), inv2.cols()), (2, 2));
    }

    #[test]
    fn sconf_diagonals() {
        let d = sconf_decontamination(0.7, 0.3).unwrap();
        assert!(d[(0, 0)].abs() < 1e-15 && (d[(1, 1)] - 1.0).abs() < 1e-15);
        let d = sconf_decontamination(0.7, 0.7).unwrap();
        assert!((d[(0, 0)] - 1.0).abs() < 1e-15 && d[(1, 1)].abs() < 1e-15);
        let d = sconf_decontamination(0.6, 0.5).unwrap();
        assert!((d[(0, 0)] - 0.5).abs() < 1e-14 && (d[(1, 1)] - 0.5).abs() < 1e-14);
        assert!(matches!(sconf_decontamination(0.5, 0.2), Err(Error::DegenerateParams(_))));
    }

    #[test]
    fn conf_diagonals() {
        let j = joint(2, &[&[0.4, 0.1], &[0.2, 0.3]]);
        let m = marginals(&j).unwrap();
        let d = conf_diagonal_inverse(&ScenarioSpec::Pconf {}, &m, 0).unwrap();
        assert!((d[(0, 0)] - 1.0).abs() < 1e-15 && (d[(1, 1)] - 0.25).abs() < 1e-15);
        let d = conf_diagonal_inverse(&ScenarioSpec::Soft {}, &m, 0).unwrap();
        assert!((d[(0, 0)] - 0.8).abs() < 1e-15);
        let j = joint(3, &[&[0.3, 0.6, 0.1]]);
        let m = marginals(&j).unwrap();
        let d = conf_diagonal_inverse(&ScenarioSpec::ScConf { y_s: 2 }, &m, 0).unwrap();
        assert!((d[(0, 0)] - 0.5).abs() < 1e-15);
        assert!((d[(1, 1)] - 1.0).abs() < 1e-15);
        assert!((d[(2, 2)] - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn method_strings() {
        assert_eq!("marginal-chain".parse::<Method>().unwrap(), Method::MarginalChain);
        assert!("bogus".parse::<Method>().is_err());
    }
}
