//! Scenario specifications, contamination matrices, observed distributions
//! and pair densities.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::joint::{marginals, FiniteJoint, Marginals};
use crate::linalg::{binomial, Matrix};

/// Largest class count accepted by compound-label scenarios.
pub const K_MAX: usize = 8;

/// Bound for `|π_p − 1/2|` and `|γ_1 + γ_2 − 1|`.
pub const DEGENERACY_TOL: f64 = 1e-9;

const STOCHASTIC_TOL: f64 = 1e-12;

/// A weak-supervision setting with its parameters. Class indices in
/// parameters (`Y_s`, `y_s`) are 1-based; binary scenarios use class 1 as
/// positive and class 2 as negative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", content = "params")]
pub enum ScenarioSpec {
    #[serde(rename = "MCD")]
    Mcd { gamma_p: f64, gamma_n: f64 },
    #[serde(rename = "UU")]
    Uu { gamma_1: f64, gamma_2: f64 },
    #[serde(rename = "PU")]
    Pu {},
    #[serde(rename = "SU")]
    Su {},
    #[serde(rename = "DU")]
    Du {},
    #[serde(rename = "SD")]
    Sd {},
    #[serde(rename = "Pcomp")]
    Pcomp {},
    #[serde(rename = "Sconf")]
    Sconf {},
    /// `flip[x][a][b] = P(Ȳ = a | Y = b, x)`; one entry broadcasts to all instances.
    #[serde(rename = "CCN")]
    Ccn { flip: Vec<[[f64; 2]; 2]> },
    /// `cond[x][j][k] = P(S = s_j | Y = k, x)`; one entry broadcasts.
    #[serde(rename = "GCCN")]
    Gccn { cond: Vec<Vec<Vec<f64>>> },
    /// `C[j][i] = C(s_j, x_i)`, dense over the compound-label space.
    #[serde(rename = "PPL")]
    Ppl {
        #[serde(rename = "C")]
        c: Vec<Vec<f64>>,
    },
    #[serde(rename = "PCPL")]
    Pcpl {},
    /// `q[d-1]` is the probability of a complementary set of size `d`.
    #[serde(rename = "MCL")]
    Mcl { q: Vec<f64> },
    #[serde(rename = "CL")]
    Cl {},
    #[serde(rename = "SubConf")]
    SubConf {
        #[serde(rename = "Y_s")]
        y_s: Vec<usize>,
    },
    #[serde(rename = "SCConf")]
    ScConf { y_s: usize },
    #[serde(rename = "Pconf")]
    Pconf {},
    #[serde(rename = "Soft")]
    Soft {},
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    Mcd,
    Ccn,
    Conf,
    Sconf,
}

impl ScenarioSpec {
    pub fn name(&self) -> &'static str {
        use ScenarioSpec::*;
        match self {
            Mcd { .. } => "MCD",
            Uu { .. } => "UU",
            Pu {} => "PU",
            Su {} => "SU",
            Du {} => "DU",
            Sd {} => "SD",
            Pcomp {} => "Pcomp",
            Sconf {} => "Sconf",
            Ccn { .. } => "CCN",
            Gccn { .. } => "GCCN",
            Ppl { .. } => "PPL",
            Pcpl {} => "PCPL",
            Mcl { .. } => "MCL",
            Cl {} => "CL",
            SubConf { .. } => "SubConf",
            ScConf { .. } => "SCConf",
            Pconf {} => "Pconf",
            Soft {} => "Soft",
        }
    }

    pub fn family(&self) -> Family {
        use ScenarioSpec::*;
        match self {
            Mcd { .. } | Uu { .. } | Pu {} | Su {} | Du {} | Sd {} | Pcomp {} => Family::Mcd,
            Sconf {} => Family::Sconf,
            Ccn { .. } | Gccn { .. } | Ppl { .. } | Pcpl {} | Mcl { .. } | Cl {} => Family::Ccn,
            SubConf { .. } | ScConf { .. } | Pconf {} | Soft {} => Family::Conf,
        }
    }

    /// Parameter block as JSON, as it appears in scenario files.
    pub fn params(&self) -> Value {
        serde_json::to_value(self)
            .ok()
            .and_then(|v| v.get("params").cloned())
            .unwrap_or_else(|| json!({}))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("spec serializes")
    }

    /// Accepts `{"name": .., "params": {..}}`; `params` may be omitted for
    /// parameter-free scenarios.
    pub fn from_json(text: &str) -> Result<Self> {
        let v: Value = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        Self::from_value(v)
    }

    pub fn from_value(mut v: Value) -> Result<Self> {
        if let Value::Object(map) = &mut v {
            map.entry("params").or_insert_with(|| json!({}));
        }
        serde_json::from_value(v).map_err(|e| Error::SchemaMismatch(e.to_string()))
    }

    /// Builds a spec from a scenario name and a params object.
    pub fn from_name(name: &str, params: Value) -> Result<Self> {
        Self::from_value(json!({ "name": name, "params": params }))
    }

    /// All scenario names accepted by [`ScenarioSpec::from_name`].
    pub const NAMES: [&'static str; 18] = [
        "MCD", "UU", "PU", "SU", "DU", "SD", "Pcomp", "Sconf", "CCN", "GCCN", "PPL", "PCPL",
        "MCL", "CL", "SubConf", "SCConf", "Pconf", "Soft",
    ];

    /// Whether the rewrite divides by `π_p − π_n`.
    pub fn needs_unbalanced_priors(&self) -> bool {
        matches!(self, ScenarioSpec::Su {} | ScenarioSpec::Du {} | ScenarioSpec::Sd {} | ScenarioSpec::Sconf {})
    }

    pub fn is_binary(&self) -> bool {
        matches!(self.family(), Family::Mcd | Family::Sconf)
            || matches!(self, ScenarioSpec::Ccn { .. } | ScenarioSpec::Pconf {})
    }
}

impl fmt::Display for ScenarioSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Checks the parameter invariants of `spec` against a joint.
pub fn validate_spec(spec: &ScenarioSpec, j: &FiniteJoint) -> Result<()> {
    let k = j.k();
    let n = j.n_x();
    if spec.is_binary() && k != 2 {
        return Err(Error::NotBinary { k });
    }
    let unit = |name: &str, v: f64| -> Result<()> {
        if (0.0..=1.0).contains(&v) {
            Ok(())
        } else {
            Err(Error::InvalidParams(format!("{name} = {v} outside [0, 1]")))
        }
    };
    use ScenarioSpec::*;
    match spec {
        Mcd { gamma_p, gamma_n } => {
            unit("gamma_p", *gamma_p)?;
            unit("gamma_n", *gamma_n)?;
            if gamma_p + gamma_n >= 1.0 {
                return Err(Error::DegenerateParams(format!(
                    "gamma_p + gamma_n = {} must be below 1",
                    gamma_p + gamma_n
                )));
            }
        }
        Uu { gamma_1, gamma_2 } => {
            unit("gamma_1", *gamma_1)?;
            unit("gamma_2", *gamma_2)?;
            if (gamma_1 + gamma_2 - 1.0).abs() <= DEGENERACY_TOL {
                return Err(Error::DegenerateParams("gamma_1 + gamma_2 = 1".into()));
            }
        }
        Ccn { flip } => {
            per_instance_len("flip", flip.len(), n)?;
            for f in flip {
                for b in 0..2 {
                    unit("flip", f[0][b])?;
                    unit("flip", f[1][b])?;
                    if (f[0][b] + f[1][b] - 1.0).abs() > STOCHASTIC_TOL {
                        return Err(Error::InvalidParams("flip columns must sum to 1".into()));
                    }
                }
            }
        }
        Gccn { cond } => {
            let labels = compound_label_space(k)?;
            per_instance_len("cond", cond.len(), n)?;
            for c in cond {
                if c.len() != labels.len() || c.iter().any(|row| row.len() != k) {
                    return Err(Error::ShapeMismatch(format!(
                        "cond must be {}x{k} per instance",
                        labels.len()
                    )));
                }
                for kk in 0..k {
                    let mut s = 0.0;
                    for row in c {
                        unit("cond", row[kk])?;
                        s += row[kk];
                    }
                    if (s - 1.0).abs() > STOCHASTIC_TOL {
                        return Err(Error::InvalidParams(format!(
                            "cond column {kk} sums to {s}, not 1"
                        )));
                    }
                }
            }
        }
        Ppl { c } => {
            let labels = compound_label_space(k)?;
            if c.len() != labels.len() || c.iter().any(|row| row.len() != n) {
                return Err(Error::ShapeMismatch(format!("C must be {}x{n}", labels.len())));
            }
            if c.iter().flatten().any(|v| !(*v >= 0.0) || !v.is_finite()) {
                return Err(Error::InvalidParams("C entries must be non-negative".into()));
            }
            for i in 0..n {
                for y in 0..k {
                    let s: f64 = labels
                        .iter()
                        .zip(c)
                        .filter(|(s, _)| s.contains(&y))
                        .map(|(_, row)| row[i])
                        .sum();
                    if (s - 1.0).abs() > STOCHASTIC_TOL {
                        return Err(Error::InvalidParams(format!(
                            "C is not proper: class {} at instance {i} sums to {s}",
                            y + 1
                        )));
                    }
                }
            }
        }
        Pcpl {} | Cl {} => {
            compound_label_space(k)?;
        }
        Mcl { q } => {
            compound_label_space(k)?;
            if q.len() != k - 1 {
                return Err(Error::ShapeMismatch(format!("q must have K-1 = {} entries", k - 1)));
            }
            if q.iter().any(|v| !(*v >= 0.0)) || (q.iter().sum::<f64>() - 1.0).abs() > STOCHASTIC_TOL {
                return Err(Error::InvalidParams("q must be a probability vector".into()));
            }
        }
        SubConf { y_s } => {
            let set = class_set(y_s, k)?;
            if set.len() == k {
                return Err(Error::InvalidParams("Y_s must be a strict subset".into()));
            }
        }
        ScConf { y_s } => {
            class_set(&[*y_s], k)?;
        }
        Pu {} | Su {} | Du {} | Sd {} | Pcomp {} | Sconf {} | Pconf {} | Soft {} => {}
    }
    if spec.needs_unbalanced_priors() {
        let m = marginals(j)?;
        if (m.priors[0] - 0.5).abs() <= DEGENERACY_TOL {
            return Err(Error::DegenerateParams(format!("{spec} needs pi_p != 1/2")));
        }
    }
    Ok(())
}

fn per_instance_len(name: &str, len: usize, n: usize) -> Result<()> {
    if len == 1 || len == n {
        Ok(())
    } else {
        Err(Error::ShapeMismatch(format!("{name} must have 1 or {n} entries, got {len}")))
    }
}

/// Converts 1-based class indices into a sorted 0-based set.
fn class_set(classes: &[usize], k: usize) -> Result<Vec<usize>> {
    if classes.is_empty() {
        return Err(Error::InvalidParams("class set is empty".into()));
    }
    let mut out: Vec<usize> = Vec::with_capacity(classes.len());
    for &c in classes {
        if c == 0 || c > k {
            return Err(Error::InvalidParams(format!("class {c} outside 1..={k}")));
        }
        out.push(c - 1);
    }
    out.sort_unstable();
    out.dedup();
    if out.len() != classes.len() {
        return Err(Error::InvalidParams("duplicate class".into()));
    }
    Ok(out)
}

/// Nonempty strict subsets of `0..k`, by size then lexicographically.
pub fn compound_label_space(k: usize) -> Result<Vec<Vec<usize>>> {
    compound_label_space_with_limit(k, K_MAX)
}

pub fn compound_label_space_with_limit(k: usize, k_max: usize) -> Result<Vec<Vec<usize>>> {
    if k > k_max {
        return Err(Error::KTooLarge { k, max: k_max });
    }
    if k < 2 {
        return Err(Error::InvalidParams(format!("K must be at least 2, got {k}")));
    }
    let mut out = Vec::with_capacity((1 << k) - 2);
    for d in 1..k {
        out.extend(subsets_of_size(k, d));
    }
    Ok(out)
}

/// Size-`d` subsets of `0..k` in lexicographic order.
pub fn subsets_of_size(k: usize, d: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, k: usize, d: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == d {
            out.push(cur.clone());
            return;
        }
        for v in start..k {
            if k - v < d - cur.len() {
                break;
            }
            cur.push(v);
            rec(v + 1, k, d, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, k, d, &mut Vec::new(), &mut out);
    out
}

/// `{1,3}` style display of a 0-based set.
pub fn label_string(s: &[usize]) -> String {
    let inner: Vec<String> = s.iter().map(|v| (v + 1).to_string()).collect();
    format!("{{{}}}", inner.join(","))
}

/// Observed-channel names in matrix-row order.
pub fn channels(spec: &ScenarioSpec, k: usize) -> Result<Vec<String>> {
    use ScenarioSpec::*;
    let fixed = |a: &[&str]| a.iter().map(|s| s.to_string()).collect();
    Ok(match spec {
        Mcd { .. } => fixed(&["P~", "N~"]),
        Uu { .. } => fixed(&["U1", "U2"]),
        Pu {} => fixed(&["P", "U"]),
        Su {} => fixed(&["S", "U"]),
        Du {} => fixed(&["D", "U"]),
        Sd {} => fixed(&["S", "D"]),
        Pcomp {} => fixed(&["Sup", "Inf"]),
        Sconf {} => fixed(&["X", "X'"]),
        Ccn { .. } | Gccn { .. } | Ppl { .. } | Pcpl {} | Mcl { .. } => {
            compound_label_space(k)?.iter().map(|s| label_string(s)).collect()
        }
        Cl {} => (0..k).map(|c| label_string(&[c])).collect(),
        SubConf { .. } | ScConf { .. } | Pconf {} | Soft {} => {
            (1..=k).map(|c| format!("conf{c}")).collect()
        }
    })
}

fn binary_priors(m: &Marginals) -> Result<(f64, f64)> {
    if m.k() != 2 {
        return Err(Error::NotBinary { k: m.k() });
    }
    Ok((m.priors[0], m.priors[1]))
}

fn mcd_matrix(a: [[f64; 2]; 2]) -> Matrix {
    Matrix::from_rows(&[a[0].to_vec(), a[1].to_vec()])
}

/// Base distributions `B(x_i)`: class-conditionals for the MCD and Sconf
/// families, the risk vector otherwise.
pub fn base_distributions(spec: &ScenarioSpec, j: &FiniteJoint, m: &Marginals, i: usize) -> Result<Vec<f64>> {
    match spec.family() {
        Family::Mcd | Family::Sconf => {
            if i >= m.n_x() {
                return Err(Error::IndexOutOfRange { index: i, len: m.n_x() });
            }
            Ok(m.conditionals_at(i))
        }
        Family::Ccn | Family::Conf => j.risk_vector(i),
    }
}

/// `M_trsf(x)`: `Π⁻¹` for the MCD and Sconf families, identity otherwise.
pub fn transform_matrix(spec: &ScenarioSpec, m: &Marginals) -> Result<Matrix> {
    match spec.family() {
        Family::Mcd | Family::Sconf => {
            if let Some(k) = m.priors.iter().position(|&p| p == 0.0) {
                return Err(Error::EmptyClass { k });
            }
            Ok(Matrix::diag(&m.priors.iter().map(|p| 1.0 / p).collect::<Vec<_>>()))
        }
        Family::Ccn | Family::Conf => Ok(Matrix::identity(m.k())),
    }
}

/// Contamination matrix `M(x_i)`. For Sconf, `i` indexes the pair
/// `(i / n_x, i % n_x)`.
pub fn contamination_matrix(spec: &ScenarioSpec, m: &Marginals, i: usize) -> Result<Matrix> {
    use ScenarioSpec::*;
    let k = m.k();
    let n = m.n_x();
    let bound = if spec.family() == Family::Sconf { n * n } else { n };
    if i >= bound {
        return Err(Error::IndexOutOfRange { index: i, len: bound });
    }
    match spec {
        Mcd { gamma_p, gamma_n } => {
            binary_priors(m)?;
            Ok(mcd_matrix([[1.0 - gamma_p, *gamma_p], [*gamma_n, 1.0 - gamma_n]]))
        }
        Uu { gamma_1, gamma_2 } => {
            binary_priors(m)?;
            if (gamma_1 + gamma_2 - 1.0).abs() <= DEGENERACY_TOL {
                return Err(Error::DegenerateParams("gamma_1 + gamma_2 = 1".into()));
            }
            Ok(mcd_matrix([[1.0 - gamma_1, *gamma_1], [*gamma_2, 1.0 - gamma_2]]))
        }
        Pu {} => {
            let (pp, pn) = binary_priors(m)?;
            Ok(mcd_matrix([[1.0, 0.0], [pp, pn]]))
        }
        Su {} => {
            let (pp, pn) = binary_priors(m)?;
            let z = pp * pp + pn * pn;
            Ok(mcd_matrix([[pp * pp / z, pn * pn / z], [pp, pn]]))
        }
        Du {} => {
            let (pp, pn) = binary_priors(m)?;
            Ok(mcd_matrix([[0.5, 0.5], [pp, pn]]))
        }
        Sd {} => {
            let (pp, pn) = binary_priors(m)?;
            let z = pp * pp + pn * pn;
            Ok(mcd_matrix([[pp * pp / z, pn * pn / z], [0.5, 0.5]]))
        }
        Pcomp {} => {
            let (pp, pn) = binary_priors(m)?;
            let zs = pp + pn * pn;
            let zi = pp * pp + pn;
            Ok(mcd_matrix([[pp / zs, pn * pn / zs], [pp * pp / zi, pn / zi]]))
        }
        Sconf {} => sconf_matrix(m, i / n, i % n),
        Ccn { flip } => {
            if k != 2 {
                return Err(Error::NotBinary { k });
            }
            let f = flip.get(i).or(flip.first()).ok_or_else(|| Error::ShapeMismatch("empty flip".into()))?;
            Ok(mcd_matrix(*f))
        }
        Gccn { cond } => {
            let c = cond.get(i).or(cond.first()).ok_or_else(|| Error::ShapeMismatch("empty cond".into()))?;
            Ok(Matrix::from_rows(c))
        }
        Ppl { c } => {
            let labels = compound_label_space(k)?;
            if c.len() != labels.len() {
                return Err(Error::ShapeMismatch(format!("C must have {} rows", labels.len())));
            }
            let mut out = Matrix::zeros(labels.len(), k);
            for (jj, s) in labels.iter().enumerate() {
                for &kk in s {
                    out[(jj, kk)] = c[jj][i];
                }
            }
            Ok(out)
        }
        Pcpl {} => {
            let labels = compound_label_space(k)?;
            let w = 1.0 / ((1u64 << (k - 1)) - 1) as f64;
            let mut out = Matrix::zeros(labels.len(), k);
            for (jj, s) in labels.iter().enumerate() {
                for &kk in s {
                    out[(jj, kk)] = w;
                }
            }
            Ok(out)
        }
        Mcl { q } => {
            let labels = compound_label_space(k)?;
            if q.len() != k - 1 {
                return Err(Error::ShapeMismatch(format!("q must have {} entries", k - 1)));
            }
            let mut out = Matrix::zeros(labels.len(), k);
            for (jj, s) in labels.iter().enumerate() {
                let d = s.len();
                let w = q[d - 1] / binomial(k - 1, d);
                for kk in 0..k {
                    if !s.contains(&kk) {
                        out[(jj, kk)] = w;
                    }
                }
            }
            Ok(out)
        }
        Cl {} => {
            compound_label_space(k)?;
            let w = 1.0 / (k - 1) as f64;
            let mut out = Matrix::zeros(k, k);
            for a in 0..k {
                for b in 0..k {
                    if a != b {
                        out[(a, b)] = w;
                    }
                }
            }
            Ok(out)
        }
        SubConf { .. } | ScConf { .. } | Pconf {} | Soft {} => {
            let r = m.r(i);
            let rs = confidence_mass(spec, &r)?;
            let mut d = Vec::with_capacity(k);
            for (kk, &rk) in r.iter().enumerate() {
                if rk == 0.0 {
                    return Err(Error::ZeroConfidence { k: kk, i });
                }
                d.push(rs / rk);
            }
            Ok(Matrix::diag(&d))
        }
    }
}

/// `P(Y ∈ Y_s | x)` for the confidence scenarios (1 for Soft).
pub fn confidence_mass(spec: &ScenarioSpec, r: &[f64]) -> Result<f64> {
    let k = r.len();
    Ok(match spec {
        ScenarioSpec::SubConf { y_s } => class_set(y_s, k)?.iter().map(|&c| r[c]).sum(),
        ScenarioSpec::ScConf { y_s } => r[class_set(&[*y_s], k)?[0]],
        ScenarioSpec::Pconf {} => {
            if k != 2 {
                return Err(Error::NotBinary { k });
            }
            r[0]
        }
        ScenarioSpec::Soft {} => 1.0,
        other => return Err(Error::WrongFamily { method: "confidence".into(), scenario: other.name().into() }),
    })
}

/// Class prior of the super-class `Y_s` (1 for Soft).
pub fn confidence_prior(spec: &ScenarioSpec, m: &Marginals) -> Result<f64> {
    confidence_mass(spec, &m.priors)
}

/// `r(x, x') = P(y = y' | x, x')`.
pub fn sconf_confidence(m: &Marginals, i: usize, i2: usize) -> Result<f64> {
    binary_priors(m)?;
    let n = m.n_x();
    if i >= n || i2 >= n {
        return Err(Error::IndexOutOfRange { index: i.max(i2), len: n });
    }
    let (px, px2) = (m.instance_marginal[i], m.instance_marginal[i2]);
    if px * px2 == 0.0 {
        return Err(Error::ZeroPairMass { i, j: i2 });
    }
    let (pp, pn) = (m.priors[0], m.priors[1]);
    let cp = &m.class_conditionals[0];
    let cn = &m.class_conditionals[1];
    Ok((pp * pp * cp[i] * cp[i2] + pn * pn * cn[i] * cn[i2]) / (px * px2))
}

/// `M_Sconf(x, x')`.
pub fn sconf_matrix(m: &Marginals, i: usize, i2: usize) -> Result<Matrix> {
    let (pp, pn) = binary_priors(m)?;
    let r = sconf_confidence(m, i, i2)?;
    let (a, b) = (r - pn, pp - r);
    if a.abs() <= DEGENERACY_TOL || b.abs() <= DEGENERACY_TOL {
        return Err(Error::DegenerateParams(format!("r(x, x') equals a prior at pair ({i}, {i2})")));
    }
    let (cp, cn) = (m.class_conditionals[0][i2], m.class_conditionals[1][i2]);
    let (p2, n2) = (pp * pp, pn * pn);
    Ok(Matrix::from_rows(&[
        vec![pp * (p2 * cp - n2 * cn) / a, pp * (n2 * cn - n2 * cp) / a],
        vec![pn * (p2 * cn - p2 * cp) / b, pn * (p2 * cp - n2 * cn) / b],
    ]))
}

/// Per-pair integrand of `M̃_Sconf`; summing over `x'` gives `M̃_Sconf(x)`.
pub fn sconf_tilde_integrand(m: &Marginals, i: usize, i2: usize) -> Result<Matrix> {
    let (pp, pn) = binary_priors(m)?;
    let r = sconf_confidence(m, i, i2)?;
    let (a, b) = (r - pn, pp - r);
    if a.abs() <= DEGENERACY_TOL || b.abs() <= DEGENERACY_TOL {
        return Err(Error::DegenerateParams(format!("r(x, x') equals a prior at pair ({i}, {i2})")));
    }
    let (cp, cn) = (m.class_conditionals[0][i2], m.class_conditionals[1][i2]);
    let (p2, n2) = (pp * pp, pn * pn);
    Ok(Matrix::from_rows(&[
        vec![(p2 * cp - n2 * cn) / a, (n2 * cn - n2 * cp) / a],
        vec![(p2 * cn - p2 * cp) / b, (p2 * cp - n2 * cn) / b],
    ]))
}

/// Everything the contamination process induces on a joint.
#[derive(Debug, Clone, PartialEq)]
pub struct ContaminationModel {
    pub spec: ScenarioSpec,
    pub family: Family,
    pub channels: Vec<String>,
    /// Per instance (per pair `i * n_x + i'` for Sconf).
    pub m: Vec<Matrix>,
    /// Per instance.
    pub m_trsf: Vec<Matrix>,
    /// `B(x) = M_trsf(x) P(x)` per instance.
    pub base: Vec<Vec<f64>>,
    /// `M(x) B(x)`, indexed like `m`.
    pub corr_p: Vec<Vec<f64>>,
    /// The pair product `P(x) P(x')` for Sconf.
    pub pair: Option<PairDistribution>,
}

impl ContaminationModel {
    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }
}

pub fn observed_distribution(spec: &ScenarioSpec, j: &FiniteJoint) -> Result<ContaminationModel> {
    validate_spec(spec, j)?;
    let m = marginals(j)?;
    let n = j.n_x();
    let t = transform_matrix(spec, &m)?;
    let mut m_trsf = Vec::with_capacity(n);
    let mut base = Vec::with_capacity(n);
    for i in 0..n {
        let b = t.mul_vec(&j.risk_vector(i)?)?;
        debug_assert!(crate::linalg::max_abs_diff(&b, &base_distributions(spec, j, &m, i)?) < 1e-12);
        base.push(b);
        m_trsf.push(t.clone());
    }
    let (mats, pair) = if spec.family() == Family::Sconf {
        let mut mats = Vec::with_capacity(n * n);
        for p in 0..n * n {
            mats.push(contamination_matrix(spec, &m, p)?);
        }
        (mats, Some(pair_distribution(PairKind::Sconf, j)?))
    } else {
        let mats = (0..n).map(|i| contamination_matrix(spec, &m, i)).collect::<Result<Vec<_>>>()?;
        (mats, None)
    };
    let corr_p = mats
        .iter()
        .enumerate()
        .map(|(p, mm)| {
            let i = if spec.family() == Family::Sconf { p / n } else { p };
            mm.mul_vec(&base[i])
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ContaminationModel {
        spec: spec.clone(),
        family: spec.family(),
        channels: channels(spec, j.k())?,
        m: mats,
        m_trsf,
        base,
        corr_p,
        pair,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PairKind {
    /// Similar pairs.
    Similar,
    /// Dissimilar pairs.
    Dissimilar,
    /// Pairwise comparison, first element ranked above the second.
    Pcomp,
    /// Independent pairs `P(x) P(x')`.
    Sconf,
}

/// `n_x × n_x` pair density; entry `(i, i')` is the probability of `(x_i, x_i')`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairDistribution {
    pub kind: PairKind,
    pub matrix: Matrix,
}

impl PairDistribution {
    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.matrix.rows()).map(|i| self.matrix.row(i).iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        (0..self.matrix.cols()).map(|c| self.matrix.col(c).iter().sum()).collect()
    }
}

pub fn pair_distribution(kind: PairKind, j: &FiniteJoint) -> Result<PairDistribution> {
    if j.k() != 2 {
        return Err(Error::NotBinary { k: j.k() });
    }
    let m = marginals(j)?;
    let n = j.n_x();
    let (pp, pn) = (m.priors[0], m.priors[1]);
    let cp = &m.class_conditionals[0];
    let cn = &m.class_conditionals[1];
    let mut out = Matrix::zeros(n, n);
    for a in 0..n {
        for b in 0..n {
            out[(a, b)] = match kind {
                PairKind::Similar => {
                    (pp * pp * cp[a] * cp[b] + pn * pn * cn[a] * cn[b]) / (pp * pp + pn * pn)
                }
                PairKind::Dissimilar => (cp[a] * cn[b] + cn[a] * cp[b]) / 2.0,
                PairKind::Pcomp => {
                    (pp * pp * cp[a] * cp[b] + pp * pn * cp[a] * cn[b] + pn * pn * cn[a] * cn[b])
                        / (pp * pp + pp * pn + pn * pn)
                }
                PairKind::Sconf => m.instance_marginal[a] * m.instance_marginal[b],
            };
        }
    }
    Ok(PairDistribution { kind, matrix: out })
}

/// Parent spec obtained by instantiating a reduction edge.
#[derive(Debug, Clone, PartialEq)]
pub struct Reduction {
    pub parent: ScenarioSpec,
    pub child: ScenarioSpec,
    pub assignment: BTreeMap<String, Value>,
}

/// Edges of the reduction graph as `(parent, child)` names.
pub const REDUCTION_EDGES: [(&str, &str); 14] = [
    ("MCD", "UU"),
    ("UU", "PU"),
    ("UU", "SU"),
    ("UU", "DU"),
    ("UU", "SD"),
    ("UU", "Pcomp"),
    ("GCCN", "CCN"),
    ("GCCN", "PPL"),
    ("PPL", "PCPL"),
    ("PPL", "MCL"),
    ("MCL", "CL"),
    ("SubConf", "SCConf"),
    ("SCConf", "Pconf"),
    ("SubConf", "Soft"),
];

/// Instantiates `parent` so that its matrix equals the matrix of `child`.
/// The PPL parent of an MCL child lists rows by partial label `S`, while
/// MCL rows are complementary sets; see [`reduction_row_map`].
pub fn reduce(parent: &str, child: &ScenarioSpec, j: &FiniteJoint) -> Result<Reduction> {
    use ScenarioSpec::*;
    let not_edge = || Error::NotAnEdge { parent: parent.to_string(), child: child.name().to_string() };
    if !REDUCTION_EDGES.iter().any(|&(p, c)| p == parent && c == child.name()) {
        return Err(not_edge());
    }
    let m = marginals(j)?;
    let k = j.k();
    let n = j.n_x();
    let mut a = BTreeMap::new();
    let parent_spec = match (parent, child) {
        ("MCD", Uu { gamma_1, gamma_2 }) => {
            a.insert("gamma_p".into(), json!(gamma_1));
            a.insert("gamma_n".into(), json!(gamma_2));
            Mcd { gamma_p: *gamma_1, gamma_n: *gamma_2 }
        }
        ("UU", c) => {
            let (pp, pn) = binary_priors(&m)?;
            let (g1, g2) = match c {
                Pu {} => (0.0, pp),
                Su {} => (pn * pn / (pp * pp + pn * pn), pp),
                Du {} => (0.5, pp),
                Sd {} => (pn * pn / (pp * pp + pn * pn), 0.5),
                Pcomp {} => (pn * pn / (pp + pn * pn), pp * pp / (pp * pp + pn)),
                _ => return Err(not_edge()),
            };
            a.insert("gamma_1".into(), json!(g1));
            a.insert("gamma_2".into(), json!(g2));
            Uu { gamma_1: g1, gamma_2: g2 }
        }
        ("GCCN", c) => {
            let cond = (0..n)
                .map(|i| contamination_matrix(c, &m, i).map(|mm| row_mapped(&mm, c, k)))
                .collect::<Result<Result<Vec<_>>>>()??;
            a.insert("cond".into(), json!(format!("M_{}(x)", c.name())));
            Gccn { cond }
        }
        ("PPL", Pcpl {}) => {
            let w = 1.0 / ((1u64 << (k - 1)) - 1) as f64;
            a.insert("C".into(), json!(w));
            Ppl { c: vec![vec![w; n]; (1 << k) - 2] }
        }
        ("PPL", Mcl { q }) => {
            let labels = compound_label_space(k)?;
            let c = labels
                .iter()
                .map(|s| {
                    let d = k - s.len();
                    vec![q[d - 1] / binomial(k - 1, d); n]
                })
                .collect();
            a.insert("C".into(), json!("q_{K-|S|} / binom(K-1, K-|S|)"));
            Ppl { c }
        }
        ("MCL", Cl {}) => {
            let mut q = vec![0.0; k - 1];
            q[0] = 1.0;
            a.insert("q".into(), json!(q));
            Mcl { q }
        }
        ("SubConf", ScConf { y_s }) => {
            a.insert("Y_s".into(), json!([y_s]));
            SubConf { y_s: vec![*y_s] }
        }
        ("SCConf", Pconf {}) => {
            a.insert("y_s".into(), json!(1));
            ScConf { y_s: 1 }
        }
        ("SubConf", Soft {}) => {
            let all: Vec<usize> = (1..=k).collect();
            a.insert("Y_s".into(), json!(all));
            SubConf { y_s: all }
        }
        _ => return Err(not_edge()),
    };
    Ok(Reduction { parent: parent_spec, child: child.clone(), assignment: a })
}

/// For each row of the child's matrix, the matching parent row. MCL rows
/// are complementary sets `s̄` and land on the partial label `[K] \ s̄` of
/// the PPL parent; every other edge keeps the row order.
pub fn reduction_row_map(parent: &str, child: &ScenarioSpec, k: usize) -> Result<Vec<usize>> {
    if let ("PPL", ScenarioSpec::Mcl { .. }) = (parent, child) {
        let labels = compound_label_space(k)?;
        let complement = |s: &[usize]| (0..k).filter(|c| !s.contains(c)).collect::<Vec<_>>();
        return Ok(labels
            .iter()
            .map(|s| {
                let c = complement(s);
                labels.iter().position(|t| *t == c).expect("complement in space")
            })
            .collect());
    }
    Ok((0..channels(child, k)?.len()).collect())
}

/// Embeds a child's matrix rows into the full compound-label space of GCCN.
fn row_mapped(mm: &Matrix, child: &ScenarioSpec, k: usize) -> Result<Vec<Vec<f64>>> {
    let labels = compound_label_space(k)?;
    let map = reduction_row_map("GCCN", child, k)?;
    let mut out = vec![vec![0.0; k]; labels.len()];
    for (row, &target) in map.iter().enumerate() {
        out[target] = mm.row(row).to_vec();
    }
    Ok(out)
}
