//! Classification risk, corrected losses and their rewritten risks.

use crate::datagen::{streams, Item, StreamKind, WeakDataset};
use crate::decontam::{decontaminate, decontaminate_model, sconf_decontamination, DecontaminationResult, Method};
use crate::error::{Error, Result};
use crate::joint::{marginals, FiniteJoint, Marginals};
use crate::linalg::Matrix;
use crate::loss::{loss_vector, LossSpec};
use crate::model::LinearModel;
use crate::scenarios::{
    compound_label_space, confidence_mass, confidence_prior, observed_distribution, pair_distribution,
    sconf_confidence, Family, PairKind, ScenarioSpec,
};

/// `L(x_i)` for every instance.
pub fn loss_table(j: &FiniteJoint, model: &LinearModel, ls: LossSpec) -> Result<Vec<Vec<f64>>> {
    if model.k() != j.k() || model.d() != j.d_feat() {
        return Err(Error::ShapeMismatch(format!(
            "model is {}x{}, joint has K = {} and d = {}",
            model.k(),
            model.d(),
            j.k(),
            j.d_feat()
        )));
    }
    j.features().iter().map(|x| loss_vector(ls, &model.scores(x))).collect()
}

/// `Σ_k Σ_i P(Y = k, x_i) ℓ_k(g(x_i))`.
pub fn classification_risk(j: &FiniteJoint, model: &LinearModel, ls: LossSpec) -> Result<f64> {
    let l = loss_table(j, model, ls)?;
    let mut r = 0.0;
    for (i, li) in l.iter().enumerate() {
        for (k, lk) in li.iter().enumerate() {
            r += j.p(k, i) * lk;
        }
    }
    Ok(r)
}

/// `corr_Lᵀ = Lᵀ M†`.
pub fn corrected_losses(l: &[f64], mdagger: &Matrix) -> Result<Vec<f64>> {
    mdagger.vec_mul(l)
}

/// Deliberate faults for exercising the checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mutation {
    #[default]
    None,
    /// Negates the corrected loss of the first channel.
    FlipFirstChannel,
}

/// `Σ_x corr_L(x) · corrP(x)`; for Sconf the symmetrized double sum over
/// `P(x)P(x')`.
pub fn rewritten_risk(spec: &ScenarioSpec, j: &FiniteJoint, model: &LinearModel, ls: LossSpec, method: Method) -> Result<f64> {
    rewritten_risk_mutated(spec, j, model, ls, method, Mutation::None)
}

pub fn rewritten_risk_mutated(
    spec: &ScenarioSpec,
    j: &FiniteJoint,
    model: &LinearModel,
    ls: LossSpec,
    method: Method,
    mutation: Mutation,
) -> Result<f64> {
    let cm = observed_distribution(spec, j)?;
    let dr = decontaminate_model(&cm, j, method)?;
    let l = loss_table(j, model, ls)?;
    let sign = |c: usize| if c == 0 && mutation == Mutation::FlipFirstChannel { -1.0 } else { 1.0 };
    let n = j.n_x();
    let mut r = 0.0;
    if cm.family == Family::Sconf {
        let px = marginals(j)?.instance_marginal;
        for a in 0..n {
            for b in 0..n {
                let w = &dr.mdagger[a * n + b];
                let pxx = px[a] * px[b];
                let avg = [(l[a][0] + l[b][0]) / 2.0, (l[a][1] + l[b][1]) / 2.0];
                let cl = corrected_losses(&avg, w)?;
                r += pxx * (sign(0) * cl[0] + sign(1) * cl[1]);
            }
        }
        return Ok(r);
    }
    for i in 0..n {
        let cl = corrected_losses(&l[i], &dr.mdagger[i])?;
        for (c, (v, p)) in cl.iter().zip(&cm.corr_p[i]).enumerate() {
            r += sign(c) * v * p;
        }
    }
    Ok(r)
}

/// `E_{X,X'}[((r − π_n)/(π_p − π_n)) ℓ_p(X) + ((π_p − r)/(π_p − π_n)) ℓ_n(X)]`.
pub fn sconf_rewritten_risk_x_only(j: &FiniteJoint, model: &LinearModel, ls: LossSpec) -> Result<f64> {
    crate::scenarios::validate_spec(&ScenarioSpec::Sconf {}, j)?;
    let m = marginals(j)?;
    let l = loss_table(j, model, ls)?;
    let n = j.n_x();
    let mut r = 0.0;
    for a in 0..n {
        for b in 0..n {
            let w = sconf_decontamination(m.priors[0], sconf_confidence(&m, a, b)?)?;
            let pxx = m.instance_marginal[a] * m.instance_marginal[b];
            r += pxx * (w[(0, 0)] * l[a][0] + w[(1, 1)] * l[a][1]);
        }
    }
    Ok(r)
}

/// Pairwise form of the SU, DU, SD and Pcomp rewrites: expectations over
/// the pair densities of the symmetrized `(𝓛(X) + 𝓛(X'))/2` losses
/// (ordered `ℓ_Sup(X) + ℓ_Inf(X')` for Pcomp).
pub fn pairwise_rewritten_risk(spec: &ScenarioSpec, j: &FiniteJoint, model: &LinearModel, ls: LossSpec) -> Result<f64> {
    crate::scenarios::validate_spec(spec, j)?;
    let m = marginals(j)?;
    let l = loss_table(j, model, ls)?;
    let (pp, pn) = (m.priors[0], m.priors[1]);
    let z = pp - pn;
    let lt = |i: usize| (l[i][0] - l[i][1]) / z;
    let lplus = |i: usize| pp / z * l[i][0] - pn / z * l[i][1];
    let lminus = |i: usize| -pn / z * l[i][0] + pp / z * l[i][1];
    let n = j.n_x();
    let sym = |pd: &Matrix, f: &dyn Fn(usize) -> f64| -> f64 {
        let mut s = 0.0;
        for a in 0..n {
            for b in 0..n {
                s += pd[(a, b)] * (f(a) + f(b)) / 2.0;
            }
        }
        s
    };
    let unl = |f: &dyn Fn(usize) -> f64| -> f64 { (0..n).map(|i| m.instance_marginal[i] * f(i)).sum() };
    let sim = pp * pp + pn * pn;
    Ok(match spec {
        ScenarioSpec::Su {} => {
            let s = pair_distribution(PairKind::Similar, j)?;
            sim * sym(&s.matrix, &lt) + unl(&lminus)
        }
        ScenarioSpec::Du {} => {
            let d = pair_distribution(PairKind::Dissimilar, j)?;
            2.0 * pp * pn * sym(&d.matrix, &|i| -lt(i)) + unl(&lplus)
        }
        ScenarioSpec::Sd {} => {
            let s = pair_distribution(PairKind::Similar, j)?;
            let d = pair_distribution(PairKind::Dissimilar, j)?;
            sim * sym(&s.matrix, &lplus) + 2.0 * pp * pn * sym(&d.matrix, &lminus)
        }
        ScenarioSpec::Pcomp {} => {
            let pc = pair_distribution(PairKind::Pcomp, j)?;
            let mut s = 0.0;
            for a in 0..n {
                for b in 0..n {
                    s += pc.matrix[(a, b)] * ((l[a][0] - pp * l[a][1]) + (-pn * l[b][0] + l[b][1]));
                }
            }
            s
        }
        other => return Err(Error::UnsupportedScenario(format!("no pairwise form for {other}"))),
    })
}

/// Hand-derived corrected losses. For Sconf, `i` is the pair index
/// `a * n_x + b`.
pub fn closed_form_corrected_loss(spec: &ScenarioSpec, m: &Marginals, i: usize, l: &[f64]) -> Result<Vec<f64>> {
    use ScenarioSpec::*;
    let k = m.k();
    if l.len() != k {
        return Err(Error::ShapeMismatch(format!("loss vector has {} entries, K = {k}", l.len())));
    }
    let binary = || -> Result<(f64, f64, f64, f64)> {
        if k != 2 {
            return Err(Error::NotBinary { k });
        }
        Ok((m.priors[0], m.priors[1], l[0], l[1]))
    };
    Ok(match spec {
        Mcd { gamma_p: g1, gamma_n: g2 } | Uu { gamma_1: g1, gamma_2: g2 } => {
            let (pp, pn, lp, ln) = binary()?;
            let d = 1.0 - g1 - g2;
            vec![
                (1.0 - g2) * pp / d * lp - g2 * pn / d * ln,
                -g1 * pp / d * lp + (1.0 - g1) * pn / d * ln,
            ]
        }
        Pu {} => {
            let (pp, _, lp, ln) = binary()?;
            vec![pp * lp - pp * ln, ln]
        }
        Su {} => {
            let (pp, pn, lp, ln) = binary()?;
            let z = 2.0 * pp - 1.0;
            vec![(pp * pp + pn * pn) / z * (lp - ln), -pn / z * lp + pp / z * ln]
        }
        Du {} => {
            let (pp, pn, lp, ln) = binary()?;
            let z = pn - pp;
            vec![2.0 * pp * pn / z * (lp - ln), -pp / z * lp + pn / z * ln]
        }
        Sd {} => {
            let (pp, pn, lp, ln) = binary()?;
            let z = pp - pn;
            vec![
                (pp * pp + pn * pn) * (pp / z * lp - pn / z * ln),
                2.0 * pp * pn * (-pn / z * lp + pp / z * ln),
            ]
        }
        Pcomp {} => {
            let (pp, pn, lp, ln) = binary()?;
            vec![lp - pp * ln, -pn * lp + ln]
        }
        Sconf {} => {
            let (pp, pn, lp, ln) = binary()?;
            let n = m.n_x();
            let r = sconf_confidence(m, i / n, i % n)?;
            vec![(r - pn) / (pp - pn) * lp, (pp - r) / (pp - pn) * ln]
        }
        Ppl { .. } | Pcpl {} => {
            let r = m.r(i);
            let unobserved = |c: usize| match spec {
                Ppl { c: cm } => cm.get(c).and_then(|row| row.get(i)).is_some_and(|&v| v == 0.0),
                _ => false,
            };
            compound_label_space(k)?
                .iter()
                .enumerate()
                .map(|(c, s)| {
                    let z: f64 = s.iter().map(|&a| r[a]).sum();
                    if z == 0.0 || unobserved(c) {
                        0.0
                    } else {
                        s.iter().map(|&a| r[a] * l[a]).sum::<f64>() / z
                    }
                })
                .collect()
        }
        Cl {} => {
            let total: f64 = l.iter().sum();
            (0..k).map(|s| total - (k - 1) as f64 * l[s]).collect()
        }
        Mcl { .. } => compound_label_space(k)?
            .iter()
            .map(|s| {
                let d = s.len() as f64;
                let inside: f64 = s.iter().map(|&a| l[a]).sum();
                let outside: f64 = l.iter().sum::<f64>() - inside;
                outside - (k as f64 - 1.0 - d) / d * inside
            })
            .collect(),
        SubConf { .. } | ScConf { .. } | Pconf {} | Soft {} => {
            let r = m.r(i);
            let rs = confidence_mass(spec, &r)?;
            if rs == 0.0 {
                return Err(Error::ZeroConfidence { k: 0, i });
            }
            (0..k).map(|c| r[c] / rs * l[c]).collect()
        }
        Ccn { .. } | Gccn { .. } => return Err(Error::UnsupportedScenario(spec.name().into())),
    })
}

/// Both sides of the PCPL half-identity:
/// `E[corr_ℓ_S]` and `½ E[Σ_k (r_k / Σ_{a∈S} r_a) ℓ_k]`.
pub fn pcpl_half_identity(j: &FiniteJoint, model: &LinearModel, ls: LossSpec) -> Result<(f64, f64)> {
    let spec = ScenarioSpec::Pcpl {};
    let cm = observed_distribution(&spec, j)?;
    let dr = decontaminate_model(&cm, j, Method::MarginalChain)?;
    let m = marginals(j)?;
    let l = loss_table(j, model, ls)?;
    let labels = compound_label_space(j.k())?;
    let (mut lhs, mut rhs) = (0.0, 0.0);
    for i in 0..j.n_x() {
        let r = m.r(i);
        let cl = corrected_losses(&l[i], &dr.mdagger[i])?;
        for (c, s) in labels.iter().enumerate() {
            let p = cm.corr_p[i][c];
            lhs += p * cl[c];
            let z: f64 = s.iter().map(|&a| r[a]).sum();
            if z > 0.0 {
                let all: f64 = (0..j.k()).map(|kk| r[kk] / z * l[i][kk]).sum();
                rhs += 0.5 * p * all;
            }
        }
    }
    Ok((lhs, rhs))
}

struct SampleGroup {
    label: String,
    scale: f64,
    samples: Vec<Vec<(usize, Vec<f64>)>>,
}

/// Empirical corrected risk of a dataset, reduced to per-instance weights:
/// `R̂(g) = Σ_i A_i · L(g(x_i))`.
pub struct EmpiricalObjective {
    /// `A_i`, one K-vector per instance.
    pub weights: Vec<Vec<f64>>,
    groups: Vec<SampleGroup>,
}

impl EmpiricalObjective {
    /// An objective with fixed weights and no sample structure.
    pub fn from_weights(weights: Vec<Vec<f64>>) -> Self {
        Self { weights, groups: Vec::new() }
    }

    pub fn build(ds: &WeakDataset, j: &FiniteJoint, method: Method) -> Result<Self> {
        let spec = &ds.spec;
        let k = j.k();
        let n = j.n_x();
        let cm = observed_distribution(spec, j)?;
        let m = marginals(j)?;
        let dr: Option<DecontaminationResult> = match cm.family {
            Family::Mcd | Family::Ccn => Some(decontaminate_model(&cm, j, method)?),
            _ => None,
        };
        let col = |i: usize, c: usize| dr.as_ref().expect("pointwise family").mdagger[i].col(c);
        let check = |i: usize| {
            if i < n {
                Ok(i)
            } else {
                Err(Error::SpecMismatch(format!("instance {i} outside the joint (n_x = {n})")))
            }
        };
        let bad_item = |label: &str| Error::SpecMismatch(format!("unexpected item kind in channel {label:?}"));
        let find = |label: &str| {
            ds.channel(label).ok_or_else(|| Error::SpecMismatch(format!("missing channel {label:?}")))
        };
        let mut groups = Vec::new();
        match cm.family {
            Family::Mcd => {
                for (c, (label, kind)) in streams(spec).iter().enumerate() {
                    let ch = find(label)?;
                    let mut samples = Vec::with_capacity(ch.items.len());
                    for it in &ch.items {
                        samples.push(match (kind, it) {
                            (StreamKind::Single, Item::Index(i)) => vec![(check(*i)?, col(*i, c))],
                            (StreamKind::Pair, Item::Pair([a, b])) => {
                                let (a, b) = (check(*a)?, check(*b)?);
                                if matches!(spec, ScenarioSpec::Pcomp {}) {
                                    vec![(a, col(a, 0)), (b, col(b, 1))]
                                } else {
                                    let half = |v: Vec<f64>| v.into_iter().map(|x| x / 2.0).collect();
                                    vec![(a, half(col(a, c))), (b, half(col(b, c)))]
                                }
                            }
                            _ => return Err(bad_item(label)),
                        });
                    }
                    groups.push(SampleGroup { label: label.to_string(), scale: 1.0, samples });
                }
            }
            Family::Sconf => {
                let ch = find("pairs")?;
                let mut samples = Vec::with_capacity(ch.items.len());
                for it in &ch.items {
                    let Item::ConfidentPair { pair: [a, b], confidence } = it else {
                        return Err(bad_item("pairs"));
                    };
                    let w = sconf_decontamination(m.priors[0], *confidence)?;
                    let half = vec![w[(0, 0)] / 2.0, w[(1, 1)] / 2.0];
                    samples.push(vec![(check(*a)?, half.clone()), (check(*b)?, half)]);
                }
                groups.push(SampleGroup { label: "pairs".into(), scale: 1.0, samples });
            }
            Family::Ccn => {
                let mut samples = Vec::new();
                for ch in &ds.channels {
                    let c = cm
                        .channels
                        .iter()
                        .position(|l| *l == ch.label)
                        .ok_or_else(|| Error::SpecMismatch(format!("unknown channel {:?}", ch.label)))?;
                    for it in &ch.items {
                        let Item::Index(i) = it else { return Err(bad_item(&ch.label)) };
                        samples.push(vec![(check(*i)?, col(*i, c))]);
                    }
                }
                groups.push(SampleGroup { label: "labels".into(), scale: 1.0, samples });
            }
            Family::Conf => {
                let ch = find("conf")?;
                let mut samples = Vec::with_capacity(ch.items.len());
                for it in &ch.items {
                    let Item::Confident { index, confidences } = it else { return Err(bad_item("conf")) };
                    if confidences.len() != k {
                        return Err(Error::SpecMismatch("confidence vector length differs from K".into()));
                    }
                    let rs = confidence_mass(spec, confidences)?;
                    if rs == 0.0 {
                        return Err(Error::ZeroConfidence { k: 0, i: *index });
                    }
                    samples.push(vec![(check(*index)?, confidences.iter().map(|r| r / rs).collect())]);
                }
                groups.push(SampleGroup { label: "conf".into(), scale: confidence_prior(spec, &m)?, samples });
            }
        }
        let mut weights = vec![vec![0.0; k]; n];
        for g in &groups {
            if g.samples.is_empty() {
                return Err(Error::EmptyChannel(g.label.clone()));
            }
            let f = g.scale / g.samples.len() as f64;
            for s in &g.samples {
                for (i, w) in s {
                    for (a, v) in weights[*i].iter_mut().zip(w) {
                        *a += f * v;
                    }
                }
            }
        }
        Ok(Self { weights, groups })
    }

    pub fn risk(&self, j: &FiniteJoint, model: &LinearModel, ls: LossSpec) -> Result<f64> {
        let l = loss_table(j, model, ls)?;
        Ok(self.risk_from_losses(&l))
    }

    pub fn risk_from_losses(&self, l: &[Vec<f64>]) -> f64 {
        self.weights
            .iter()
            .zip(l)
            .map(|(a, li)| a.iter().zip(li).map(|(x, y)| x * y).sum::<f64>())
            .sum()
    }

    /// Estimate and its standard error from the per-sample spread.
    pub fn risk_with_se(&self, j: &FiniteJoint, model: &LinearModel, ls: LossSpec) -> Result<(f64, f64)> {
        let l = loss_table(j, model, ls)?;
        let mut est = 0.0;
        let mut var = 0.0;
        for g in &self.groups {
            let vals: Vec<f64> = g
                .samples
                .iter()
                .map(|s| s.iter().map(|(i, w)| w.iter().zip(&l[*i]).map(|(a, b)| a * b).sum::<f64>()).sum())
                .collect();
            let n = vals.len() as f64;
            let mean = vals.iter().sum::<f64>() / n;
            let sv = if vals.len() > 1 {
                vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
            } else {
                0.0
            };
            est += g.scale * mean;
            var += g.scale * g.scale * sv / n;
        }
        Ok((est, var.sqrt()))
    }
}

/// Empirical corrected risk of `model` on a sampled dataset.
pub fn empirical_risk(ds: &WeakDataset, j: &FiniteJoint, model: &LinearModel, ls: LossSpec, method: Method) -> Result<f64> {
    EmpiricalObjective::build(ds, j, method)?.risk(j, model, ls)
}

/// Decontamination of `spec` on `j` with the family default method.
pub fn default_decontamination(spec: &ScenarioSpec, j: &FiniteJoint) -> Result<DecontaminationResult> {
    decontaminate(spec, j, Method::Auto)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{sample_weak_dataset, SampleSizes};
    use crate::model::random_model;

    fn joint() -> FiniteJoint {
        FiniteJoint::new(
            2,
            vec![vec![0.0, 1.0], vec![1.0, -0.5], vec![0.3, 0.2]],
            vec![vec![0.3, 0.1, 0.17], vec![0.05, 0.3, 0.08]],
        )
        .unwrap()
    }

    #[test]
    fn zero_one_risk_edges() {
        let j = FiniteJoint::new(2, vec![vec![1.0], vec![-1.0]], vec![vec![0.5, 0.0], vec![0.0, 0.5]]).unwrap();
        let perfect = LinearModel::new(vec![vec![1.0], vec![-1.0]], vec![0.0, 0.0]).unwrap();
        assert_eq!(classification_risk(&j, &perfect, LossSpec::ZeroOne).unwrap(), 0.0);
        let constant = LinearModel::new(vec![vec![0.0], vec![0.0]], vec![0.0, 1.0]).unwrap();
        assert_eq!(classification_risk(&j, &constant, LossSpec::ZeroOne).unwrap(), 0.5);
    }

    #[test]
    fn pu_corrected_losses() {
        let j = joint();
        let m = marginals(&j).unwrap();
        let dr = default_decontamination(&ScenarioSpec::Pu {}, &j).unwrap();
        let l = [0.7, 0.2];
        let cl = corrected_losses(&l, &dr.mdagger[0]).unwrap();
        let pp = m.priors[0];
        assert!((cl[0] - (pp * 0.7 - pp * 0.2)).abs() < 1e-15);
        assert!((cl[1] - 0.2).abs() < 1e-15);
    }

    #[test]
    fn rewrites_match_exact_risk() {
        let j = joint();
        let model = random_model(2, 2, 1.0, 3);
        let exact = classification_risk(&j, &model, LossSpec::Logistic).unwrap();
        for spec in [ScenarioSpec::Pu {}, ScenarioSpec::Su {}, ScenarioSpec::Pcomp {}, ScenarioSpec::Sconf {}, ScenarioSpec::Soft {}] {
            let r = rewritten_risk(&spec, &j, &model, LossSpec::Logistic, Method::Auto).unwrap();
            assert!((r - exact).abs() < 1e-12, "{spec}: {r} vs {exact}");
        }
        let x = sconf_rewritten_risk_x_only(&j, &model, LossSpec::Logistic).unwrap();
        assert!((x - exact).abs() < 1e-12);
        for spec in [ScenarioSpec::Su {}, ScenarioSpec::Du {}, ScenarioSpec::Sd {}, ScenarioSpec::Pcomp {}] {
            let r = pairwise_rewritten_risk(&spec, &j, &model, LossSpec::Logistic).unwrap();
            assert!((r - exact).abs() < 1e-12, "{spec}");
        }
    }

    #[test]
    fn mutation_breaks_equality() {
        let j = joint();
        let model = random_model(2, 2, 1.0, 3);
        let exact = classification_risk(&j, &model, LossSpec::Logistic).unwrap();
        let r = rewritten_risk_mutated(&ScenarioSpec::Pu {}, &j, &model, LossSpec::Logistic, Method::Auto, Mutation::FlipFirstChannel)
            .unwrap();
        assert!((r - exact).abs() > 1e-6);
    }

    #[test]
    fn pcomp_and_cl_closed_forms() {
        let j = joint();
        let m = marginals(&j).unwrap();
        let l = [0.9, 0.4];
        let c = closed_form_corrected_loss(&ScenarioSpec::Pcomp {}, &m, 0, &l).unwrap();
        assert!((c[0] - (0.9 - m.priors[0] * 0.4)).abs() < 1e-15);
        assert!((c[1] - (-m.priors[1] * 0.9 + 0.4)).abs() < 1e-15);
        let j3 = FiniteJoint::new(3, vec![vec![0.0]], vec![vec![0.2], vec![0.5], vec![0.3]]).unwrap();
        let m3 = marginals(&j3).unwrap();
        let l3 = [0.1, 0.6, 1.5];
        let c = closed_form_corrected_loss(&ScenarioSpec::Cl {}, &m3, 0, &l3).unwrap();
        assert!((c[1] - (2.2 - 2.0 * 0.6)).abs() < 1e-15);
        let soft = closed_form_corrected_loss(&ScenarioSpec::Soft {}, &m3, 0, &l3).unwrap();
        let want: f64 = (0..3).map(|k| m3.r(0)[k] * l3[k]).sum();
        assert!((soft.iter().sum::<f64>() - want).abs() < 1e-15);
        assert!(matches!(
            closed_form_corrected_loss(&ScenarioSpec::Gccn { cond: vec![] }, &m3, 0, &l3),
            Err(Error::UnsupportedScenario(_))
        ));
    }

    #[test]
    fn empirical_channel_checks() {
        let j = joint();
        let model = random_model(2, 2, 1.0, 3);
        let ds = sample_weak_dataset(&ScenarioSpec::Pu {}, &j, &"P=10,U=0".parse().unwrap(), 1).unwrap();
        let e = empirical_risk(&ds, &j, &model, LossSpec::Logistic, Method::Auto).unwrap_err();
        assert_eq!(e, Error::EmptyChannel("U".into()));
        let mut ds = sample_weak_dataset(&ScenarioSpec::Pu {}, &j, &SampleSizes::Total(5), 1).unwrap();
        ds.channels.pop();
        assert!(matches!(empirical_risk(&ds, &j, &model, LossSpec::Logistic, Method::Auto), Err(Error::SpecMismatch(_))));
    }

    #[test]
    fn cl_estimator_shape() {
        let j = FiniteJoint::new(
            3,
            vec![vec![0.0], vec![1.0]],
            vec![vec![0.1, 0.2], vec![0.3, 0.1], vec![0.2, 0.1]],
        )
        .unwrap();
        let model = random_model(3, 1, 1.0, 8);
        let ds = sample_weak_dataset(&ScenarioSpec::Cl {}, &j, &SampleSizes::Total(50), 2).unwrap();
        let got = empirical_risk(&ds, &j, &model, LossSpec::Logistic, Method::Inversion).unwrap();
        let l = loss_table(&j, &model, LossSpec::Logistic).unwrap();
        let mut want = 0.0;
        for (c, ch) in ds.channels.iter().enumerate() {
            for it in &ch.items {
                let Item::Index(i) = it else { unreachable!() };
                want += l[*i].iter().sum::<f64>() - 2.0 * l[*i][c];
            }
        }
        want /= 50.0;
        assert!((got - want).abs() < 1e-12);
    }
}
