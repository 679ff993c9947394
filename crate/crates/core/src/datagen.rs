//! Sampling weak datasets from a finite joint.

use std::collections::BTreeMap;
use std::str::FromStr;

use rand::RngCore;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::joint::{marginals, FiniteJoint};
use crate::linalg::Matrix;
use crate::scenarios::{
    confidence_mass, observed_distribution, pair_distribution, sconf_confidence, subsets_of_size,
    Family, PairKind, ScenarioSpec,
};

/// One observation in a channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Item {
    Index(usize),
    Pair([usize; 2]),
    Confident { index: usize, confidences: Vec<f64> },
    ConfidentPair { pair: [usize; 2], confidence: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Channel {
    pub label: String,
    pub items: Vec<Item>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakDataset {
    pub spec: ScenarioSpec,
    pub seed: u64,
    pub channels: Vec<Channel>,
}

impl WeakDataset {
    pub fn len(&self) -> usize {
        self.channels.iter().map(|c| c.items.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn channel(&self, label: &str) -> Option<&Channel> {
        self.channels.iter().find(|c| c.label == label)
    }
}

pub fn dataset_to_json(ds: &WeakDataset) -> String {
    serde_json::to_string(ds).expect("dataset serializes")
}

pub fn dataset_from_json(text: &str) -> Result<WeakDataset> {
    let v: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    let spec_v = v.get("spec").cloned().ok_or_else(|| Error::SchemaMismatch("missing spec".into()))?;
    let spec = ScenarioSpec::from_value(spec_v)?;
    let mut v = v;
    v["spec"] = serde_json::to_value(&spec).expect("spec serializes");
    let ds: WeakDataset = serde_json::from_value(v).map_err(|e| Error::SchemaMismatch(e.to_string()))?;
    let expected = stream_labels(&ds.spec, usize::MAX)?;
    for c in &ds.channels {
        if !expected.is_empty() && !expected.contains(&c.label) {
            return Err(Error::SchemaMismatch(format!("channel {:?} does not belong to {}", c.label, ds.spec)));
        }
    }
    Ok(ds)
}

/// What a sampling stream emits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamKind {
    Single,
    Pair,
}

/// Sampling streams of a scenario: `(label, kind)`. CCN-family scenarios
/// have one stream whose draws are split by compound label.
pub fn streams(spec: &ScenarioSpec) -> Vec<(&'static str, StreamKind)> {
    use ScenarioSpec::*;
    use StreamKind::*;
    match spec {
        Mcd { .. } => vec![("P~", Single), ("N~", Single)],
        Uu { .. } => vec![("U1", Single), ("U2", Single)],
        Pu {} => vec![("P", Single), ("U", Single)],
        Su {} => vec![("S", Pair), ("U", Single)],
        Du {} => vec![("D", Pair), ("U", Single)],
        Sd {} => vec![("S", Pair), ("D", Pair)],
        Pcomp {} => vec![("Sup/Inf", Pair)],
        Sconf {} => vec![("pairs", Pair)],
        Ccn { .. } | Gccn { .. } | Ppl { .. } | Pcpl {} | Mcl { .. } | Cl {} => vec![("labels", Single)],
        SubConf { .. } | ScConf { .. } | Pconf {} | Soft {} => vec![("conf", Single)],
    }
}

/// Channel labels that may appear in a dataset of `spec` (empty when they
/// depend on `K` and `k` is `usize::MAX`).
fn stream_labels(spec: &ScenarioSpec, k: usize) -> Result<Vec<String>> {
    if spec.family() == Family::Ccn {
        if k == usize::MAX {
            return Ok(Vec::new());
        }
        return crate::scenarios::channels(spec, k);
    }
    Ok(streams(spec).iter().map(|(l, _)| l.to_string()).collect())
}

/// Requested sample sizes: one total, or counts per stream label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SampleSizes {
    Total(usize),
    PerChannel(BTreeMap<String, usize>),
}

impl FromStr for SampleSizes {
    type Err = Error;
    /// `"1000"` or `"P=500,U=800"`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Ok(n) = s.parse::<usize>() {
            return Ok(SampleSizes::Total(n));
        }
        let mut map = BTreeMap::new();
        for part in s.split(',') {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| Error::InvalidParams(format!("bad sample size {part:?}")))?;
            let n = v
                .trim()
                .parse::<usize>()
                .map_err(|_| Error::InvalidParams(format!("bad sample size {part:?}")))?;
            map.insert(k.trim().to_string(), n);
        }
        Ok(SampleSizes::PerChannel(map))
    }
}

impl SampleSizes {
    fn resolve(&self, spec: &ScenarioSpec) -> Result<Vec<usize>> {
        let st = streams(spec);
        match self {
            SampleSizes::Total(n) => Ok(vec![*n; st.len()]),
            SampleSizes::PerChannel(map) => {
                for key in map.keys() {
                    if !st.iter().any(|(l, _)| l == key) {
                        return Err(Error::InvalidParams(format!("unknown channel {key:?} for {spec}")));
                    }
                }
                st.iter()
                    .map(|(l, _)| {
                        map.get(*l)
                            .copied()
                            .ok_or_else(|| Error::InvalidParams(format!("missing size for channel {l:?}")))
                    })
                    .collect()
            }
        }
    }
}

/// Cumulative-inversion sampler over a fixed support order.
#[derive(Debug, Clone)]
pub struct Categorical {
    cum: Vec<f64>,
}

impl Categorical {
    pub fn new(weights: &[f64]) -> Result<Self> {
        let mut cum = Vec::with_capacity(weights.len());
        let mut acc = 0.0;
        for &w in weights {
            if !(w >= 0.0) {
                return Err(Error::InvalidParams("negative sampling weight".into()));
            }
            acc += w;
            cum.push(acc);
        }
        if !(acc > 0.0) {
            return Err(Error::ZeroChannelMass("categorical".into()));
        }
        for c in &mut cum {
            *c /= acc;
        }
        Ok(Self { cum })
    }

    /// Index for a uniform draw in `[0, 1)`. Zero-weight outcomes are
    /// never returned.
    pub fn pick(&self, u: f64) -> usize {
        let idx = self.cum.partition_point(|&c| c <= u);
        if idx < self.cum.len() {
            return idx;
        }
        let last = *self.cum.last().expect("nonempty");
        self.cum.iter().position(|&c| c == last).expect("present")
    }
}

/// Uniform stream for one channel: ChaCha keyed by `seed`, stream = channel
/// index, position = draw index.
pub struct ChannelRng(ChaCha8Rng);

impl ChannelRng {
    pub fn new(seed: u64, channel: u64) -> Self {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        r.set_stream(channel);
        Self(r)
    }

    /// 53-bit uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

fn draw_singles(weights: &[f64], n: usize, rng: &mut ChannelRng, label: &str) -> Result<Vec<usize>> {
    if n == 0 {
        return Ok(Vec::new());
    }
    let cat = Categorical::new(weights).map_err(|e| match e {
        Error::ZeroChannelMass(_) => Error::ZeroChannelMass(label.to_string()),
        other => other,
    })?;
    Ok((0..n).map(|_| cat.pick(rng.uniform())).collect())
}

fn draw_pairs(pair: &Matrix, n: usize, rng: &mut ChannelRng, label: &str) -> Result<Vec<[usize; 2]>> {
    let nx = pair.cols();
    let flat: Vec<f64> = (0..pair.rows()).flat_map(|a| pair.row(a).to_vec()).collect();
    Ok(draw_singles(&flat, n, rng, label)?.into_iter().map(|p| [p / nx, p % nx]).collect())
}

/// Draws a dataset from the exact channel distributions of `spec` on `j`.
pub fn sample_weak_dataset(spec: &ScenarioSpec, j: &FiniteJoint, n: &SampleSizes, seed: u64) -> Result<WeakDataset> {
    let cm = observed_distribution(spec, j)?;
    let m = marginals(j)?;
    let sizes = n.resolve(spec)?;
    let nx = j.n_x();
    let k = j.k();
    let mut out = Vec::new();
    match spec.family() {
        Family::Mcd => {
            for (c, ((label, kind), &size)) in streams(spec).iter().zip(&sizes).enumerate() {
                let mut rng = ChannelRng::new(seed, c as u64);
                let items = match kind {
                    StreamKind::Single => {
                        let row: Vec<f64> = (0..nx).map(|i| cm.corr_p[i][c]).collect();
                        draw_singles(&row, size, &mut rng, label)?.into_iter().map(Item::Index).collect()
                    }
                    StreamKind::Pair => {
                        let kind = match (*label, spec) {
                            ("S", _) => PairKind::Similar,
                            ("D", _) => PairKind::Dissimilar,
                            _ => PairKind::Pcomp,
                        };
                        let pd = pair_distribution(kind, j)?;
                        draw_pairs(&pd.matrix, size, &mut rng, label)?.into_iter().map(Item::Pair).collect()
                    }
                };
                out.push(Channel { label: label.to_string(), items });
            }
        }
        Family::Sconf => {
            let pd = pair_distribution(PairKind::Sconf, j)?;
            let mut rng = ChannelRng::new(seed, 0);
            let items = draw_pairs(&pd.matrix, sizes[0], &mut rng, "pairs")?
                .into_iter()
                .map(|p| Ok(Item::ConfidentPair { pair: p, confidence: sconf_confidence(&m, p[0], p[1])? }))
                .collect::<Result<_>>()?;
            out.push(Channel { label: "pairs".into(), items });
        }
        Family::Conf => {
            let row: Vec<f64> = (0..nx).map(|i| cm.corr_p[i][0]).collect();
            let mut rng = ChannelRng::new(seed, 0);
            let items = draw_singles(&row, sizes[0], &mut rng, "conf")?
                .into_iter()
                .map(|i| Item::Confident { index: i, confidences: m.r(i) })
                .collect();
            // Guard against a super-class with no mass at all.
            confidence_mass(spec, &m.priors)?;
            out.push(Channel { label: "conf".into(), items });
        }
        Family::Ccn => {
            let labels = cm.channels.clone();
            let nl = labels.len();
            let mut buckets: Vec<Vec<Item>> = vec![Vec::new(); nl];
            let total = sizes[0];
            if let ScenarioSpec::Mcl { q } = spec {
                let mut size_rng = ChannelRng::new(seed, 0);
                let mut pick_rng = ChannelRng::new(seed, 1);
                let size_cat = Categorical::new(q)?;
                let mut offset = vec![0usize; k];
                for d in 1..k - 1 {
                    offset[d] = offset[d - 1] + subsets_of_size(k, d).len();
                }
                let conditionals: Vec<Option<Categorical>> = (1..k)
                    .map(|d| {
                        let nd = subsets_of_size(k, d).len();
                        let w: Vec<f64> = (0..nd)
                            .flat_map(|c| (0..nx).map(move |i| (c, i)))
                            .map(|(c, i)| cm.corr_p[i][offset[d - 1] + c])
                            .collect();
                        Categorical::new(&w).ok()
                    })
                    .collect();
                for _ in 0..total {
                    let d = size_cat.pick(size_rng.uniform()) + 1;
                    let cat = conditionals[d - 1].as_ref().ok_or_else(|| Error::ZeroChannelMass(format!("size {d}")))?;
                    let p = cat.pick(pick_rng.uniform());
                    buckets[offset[d - 1] + p / nx].push(Item::Index(p % nx));
                }
            } else {
                let w: Vec<f64> = (0..nl).flat_map(|c| (0..nx).map(move |i| (c, i))).map(|(c, i)| cm.corr_p[i][c]).collect();
                let mut rng = ChannelRng::new(seed, 0);
                for p in draw_singles(&w, total, &mut rng, "labels")? {
                    buckets[p / nx].push(Item::Index(p % nx));
                }
            }
            out = labels.into_iter().zip(buckets).map(|(label, items)| Channel { label, items }).collect();
        }
    }
    Ok(WeakDataset { spec: spec.clone(), seed, channels: out })
}

/// Empirical channel frequencies over instances, for distribution checks.
pub fn channel_frequencies(ch: &Channel, nx: usize) -> Vec<f64> {
    let mut f = vec![0.0; nx];
    for it in &ch.items {
        if let Item::Index(i) | Item::Confident { index: i, .. } = it {
            f[*i] += 1.0;
        }
    }
    let n = ch.items.len().max(1) as f64;
    f.iter().map(|v| v / n).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn deterministic() -> FiniteJoint {
        FiniteJoint::new(2, vec![vec![0.0], vec![1.0]], vec![vec![0.5, 0.0], vec![0.0, 0.5]]).unwrap()
    }

    #[test]
    fn pu_positive_channel_is_positive_instance() {
        let ds = sample_weak_dataset(&ScenarioSpec::Pu {}, &deterministic(), &"P=5,U=5".parse().unwrap(), 3).unwrap();
        assert_eq!(ds.channels[0].items, vec![Item::Index(0); 5]);
        assert_eq!(ds.channels[1].items.len(), 5);
    }

    #[test]
    fn sample_sizes_parse() {
        assert_eq!("12".parse::<SampleSizes>().unwrap(), SampleSizes::Total(12));
        assert!("P=1,U".parse::<SampleSizes>().is_err());
        let e = sample_weak_dataset(&ScenarioSpec::Pu {}, &deterministic(), &"P=1,Q=2".parse().unwrap(), 0).unwrap_err();
        assert!(matches!(e, Error::InvalidParams(_)));
    }

    #[test]
    fn same_seed_same_dataset() {
        let j = FiniteJoint::new(
            3,
            vec![vec![0.0], vec![1.0]],
            vec![vec![0.1, 0.2], vec![0.3, 0.1], vec![0.2, 0.1]],
        )
        .unwrap();
        let spec = ScenarioSpec::Mcl { q: vec![0.4, 0.6] };
        let a = sample_weak_dataset(&spec, &j, &SampleSizes::Total(200), 11).unwrap();
        let b = sample_weak_dataset(&spec, &j, &SampleSizes::Total(200), 11).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 200);
        let c = sample_weak_dataset(&spec, &j, &SampleSizes::Total(200), 12).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn soft_carries_oracle_confidences() {
        let j = FiniteJoint::new(2, vec![vec![0.0], vec![1.0]], vec![vec![0.3, 0.1], vec![0.2, 0.4]]).unwrap();
        let m = marginals(&j).unwrap();
        let ds = sample_weak_dataset(&ScenarioSpec::Soft {}, &j, &SampleSizes::Total(20), 1).unwrap();
        for it in &ds.channels[0].items {
            let Item::Confident { index, confidences } = it else { panic!("wrong item") };
            assert_eq!(confidences, &m.r(*index));
        }
    }

    #[test]
    fn json_round_trip_and_errors() {
        let j = FiniteJoint::new(2, vec![vec![0.0], vec![1.0]], vec![vec![0.3, 0.1], vec![0.2, 0.4]]).unwrap();
        for spec in [ScenarioSpec::Su {}, ScenarioSpec::Sconf {}, ScenarioSpec::Pconf {}, ScenarioSpec::Cl {}] {
            let ds = sample_weak_dataset(&spec, &j, &SampleSizes::Total(7), 5).unwrap();
            let back = dataset_from_json(&dataset_to_json(&ds)).unwrap();
            assert_eq!(ds, back);
        }
        let text = dataset_to_json(&sample_weak_dataset(&ScenarioSpec::Pu {}, &j, &SampleSizes::Total(3), 5).unwrap());
        assert!(matches!(dataset_from_json(&text[..text.len() / 2]), Err(Error::Parse(_))));
        let wrong = text.replace("\"PU\"", "\"Nope\"");
        assert!(matches!(dataset_from_json(&wrong), Err(Error::SchemaMismatch(_))));
        let wrong = text.replace("\"label\":\"U\"", "\"label\":\"Z\"");
        assert!(matches!(dataset_from_json(&wrong), Err(Error::SchemaMismatch(_))));
    }

    #[test]
    fn categorical_skips_zero_weights() {
        let c = Categorical::new(&[0.0, 1.0, 0.0]).unwrap();
        for u in [0.0, 0.3, 0.999_999_999] {
            assert_eq!(c.pick(u), 1);
        }
        assert!(matches!(Categorical::new(&[0.0, 0.0]), Err(Error::ZeroChannelMass(_))));
    }
}
