//! Max ensembles of subset classifiers and the hill-climbing trainer.
//!
//! A subset classifier looks only at the features in its subset and rejects
//! any input missing one of them. Dropping a feature can therefore only turn
//! members off, so the pointwise maximum over members is truthful.

use std::sync::Arc;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::features::{Dataset, FeatureKind, FeatureSubset, FeatureValue, FeatureVector};
use crate::linear::{sigmoid, Design, LinearModel, TrainConfig};
use crate::strategic::Classifier;
use crate::textio::{esc, split_lines};
use crate::transform::Encoder;

#[derive(Debug, Clone, PartialEq)]
pub enum Member {
    /// Rejects everything; used when a subset has no training rows.
    Reject,
    Linear(LinearModel),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubsetClassifier {
    subset: FeatureSubset,
    inner: Member,
}

impl SubsetClassifier {
    pub fn new(subset: FeatureSubset, inner: Member) -> Self {
        Self { subset, inner }
    }

    pub fn subset(&self) -> &FeatureSubset {
        &self.subset
    }

    pub fn inner(&self) -> &Member {
        &self.inner
    }

    pub fn applies_to(&self, x: &FeatureVector) -> bool {
        x.has_all(&self.subset)
    }

    fn score(&self, x: &FeatureVector) -> Option<f64> {
        if !self.applies_to(x) {
            return None;
        }
        match &self.inner {
            Member::Reject => Some(f64::NEG_INFINITY),
            Member::Linear(m) => Some(m.score_unchecked(x)),
        }
    }
}

impl Classifier for SubsetClassifier {
    fn predict(&self, x: &FeatureVector) -> u8 {
        self.score(x).is_some_and(|z| z >= 0.0) as u8
    }

    /// `None` when the member does not apply to `x`.
    fn proba(&self, x: &FeatureVector) -> Option<f64> {
        self.score(x).map(sigmoid)
    }

    fn is_truthful(&self) -> bool {
        true
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaxEnsemble {
    encoder: Arc<Encoder>,
    members: Vec<SubsetClassifier>,
    trace: Vec<usize>,
}

impl MaxEnsemble {
    pub fn members(&self) -> &[SubsetClassifier] {
        &self.members
    }

    /// Training errors after initialization and after each sweep.
    pub fn trace(&self) -> &[usize] {
        &self.trace
    }

    pub fn encoder(&self) -> &Arc<Encoder> {
        &self.encoder
    }

    pub fn to_text(&self) -> String {
        let mut out = Vec::new();
        self.encoder.write_text(&mut out);
        let trace: Vec<String> = self.trace.iter().map(|t| t.to_string()).collect();
        out.push(format!("trace\t{}", trace.join("\t")));
        for m in &self.members {
            let subset: Vec<String> = m.subset.iter().map(|i| i.to_string()).collect();
            let kind = match m.inner {
                Member::Reject => "reject",
                Member::Linear(_) => "linear",
            };
            out.push(format!("member\t{}\t{kind}", esc(&subset.join(","))));
            if let Member::Linear(lm) = &m.inner {
                lm.write_params(&mut out);
            }
            out.push("endmember".into());
        }
        out.join("\n") + "\n"
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let lines = split_lines(text);
        let encoder = Arc::new(Encoder::read_text(&lines)?);
        let k = encoder.input_schema().len();
        let mut members = Vec::new();
        let mut trace = Vec::new();
        let mut i = 0;
        while i < lines.len() {
            let f = &lines[i];
            match f[0].as_str() {
                "trace" => {
                    trace = f[1..]
                        .iter()
                        .map(|s| s.parse().map_err(|_| Error::Parse(format!("bad trace '{s}'"))))
                        .collect::<Result<_>>()?;
                }
                "member" => {
                    let end = lines[i..]
                        .iter()
                        .position(|l| l[0] == "endmember")
                        .ok_or_else(|| Error::Parse("unterminated member".into()))?
                        + i;
                    let idx = f
                        .get(1)
                        .ok_or_else(|| Error::Parse("member without subset".into()))?
                        .split(',')
                        .map(|s| s.parse().map_err(|_| Error::Parse(format!("bad index '{s}'"))))
                        .collect::<Result<Vec<usize>>>()?;
                    let subset = FeatureSubset::new(idx, k)?;
                    let inner = match f.get(2).map(String::as_str) {
                        Some("reject") => Member::Reject,
                        Some("linear") => Member::Linear(LinearModel::read_params(
                            encoder.clone(),
                            &lines[i + 1..end],
                        )?),
                        other => return Err(Error::Parse(format!("bad member kind {other:?}"))),
                    };
                    members.push(SubsetClassifier { subset, inner });
                    i = end;
                }
                _ => {}
            }
            i += 1;
        }
        Ok(Self { encoder, members, trace })
    }
}

impl Classifier for MaxEnsemble {
    fn predict(&self, x: &FeatureVector) -> u8 {
        self.members.iter().any(|m| m.predict(x) == 1) as u8
    }

    /// Largest member probability among applicable members, 0 if none apply.
    fn proba(&self, x: &FeatureVector) -> Option<f64> {
        Some(self.members.iter().filter_map(|m| m.proba(x)).fold(0.0, f64::max))
    }

    fn is_truthful(&self) -> bool {
        true
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SubsetStrategy {
    /// Every nonempty subset of the `k` features with the highest ANOVA F.
    AllSubsetsOfTopK(usize),
    /// Every nonempty subset with at most `k` features.
    AllOfSizeAtMost(usize),
    /// Random distinct singletons and pairs.
    Sampled { singletons: usize, pairs: usize },
    Explicit(Vec<FeatureSubset>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct HcConfig {
    pub strategy: SubsetStrategy,
    /// Minimum improvement in training 0-1 loss (fraction of rows) per sweep.
    pub delta: f64,
    /// Sweep cap; defaults to the number of training rows.
    pub max_iterations: Option<usize>,
    pub seed: u64,
    pub train: TrainConfig,
}

impl Default for HcConfig {
    fn default() -> Self {
        Self {
            strategy: SubsetStrategy::AllSubsetsOfTopK(4),
            delta: 1e-4,
            max_iterations: None,
            seed: 0,
            train: TrainConfig::default(),
        }
    }
}

/// One-way ANOVA F statistic of each feature between the two label groups.
/// Categorical features score the largest F over their level indicators.
/// Zero within-group variance gives infinity if the group means differ and
/// 0 otherwise.
pub fn anova_f(train: &Dataset) -> Vec<f64> {
    let f_of = |values: &[(f64, u8)]| -> f64 {
        let mut sum = [0.0; 2];
        let mut cnt = [0usize; 2];
        for &(v, y) in values {
            sum[y as usize] += v;
            cnt[y as usize] += 1;
        }
        if cnt[0] == 0 || cnt[1] == 0 {
            return 0.0;
        }
        let n = (cnt[0] + cnt[1]) as f64;
        let mean = [sum[0] / cnt[0] as f64, sum[1] / cnt[1] as f64];
        let grand = (sum[0] + sum[1]) / n;
        let ssb: f64 = (0..2).map(|g| cnt[g] as f64 * (mean[g] - grand).powi(2)).sum();
        let ssw: f64 = values.iter().map(|&(v, y)| (v - mean[y as usize]).powi(2)).sum();
        let df_w = n - 2.0;
        if ssw <= 1e-12 * ssb.max(1.0) || df_w <= 0.0 {
            return if ssb > 0.0 { f64::INFINITY } else { 0.0 };
        }
        ssb / (ssw / df_w)
    };
    train
        .schema()
        .features()
        .iter()
        .enumerate()
        .map(|(i, spec)| {
            let present: Vec<_> =
                train.rows().iter().filter(|r| r.x.get(i).is_present()).collect();
            match &spec.kind {
                FeatureKind::Numeric => {
                    let col: Vec<(f64, u8)> =
                        present.iter().filter_map(|r| r.x.get(i).as_f64().map(|v| (v, r.y))).collect();
                    f_of(&col)
                }
                FeatureKind::Categorical { levels } => (0..levels.len() as u32)
                    .map(|l| {
                        let col: Vec<(f64, u8)> = present
                            .iter()
                            .map(|r| ((r.x.get(i) == FeatureValue::Categorical(l)) as u8 as f64, r.y))
                            .collect();
                        f_of(&col)
                    })
                    .fold(0.0, f64::max),
            }
        })
        .collect()
}

/// Feature indices by descending F, ties by index.
pub fn anova_f_rank(train: &Dataset) -> Vec<usize> {
    let f = anova_f(train);
    let mut idx: Vec<usize> = (0..f.len()).collect();
    idx.sort_by(|&a, &b| f[b].total_cmp(&f[a]).then(a.cmp(&b)));
    idx
}

fn sort_subsets(mut v: Vec<FeatureSubset>) -> Vec<FeatureSubset> {
    v.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    v
}

pub fn generate_subsets(train: &Dataset, strategy: &SubsetStrategy, seed: u64) -> Result<Vec<FeatureSubset>> {
    let k = train.arity();
    let subsets = match strategy {
        SubsetStrategy::AllSubsetsOfTopK(top) => {
            if *top == 0 || *top > k || *top > 20 {
                return Err(Error::Config(format!("top-k must be in 1..={}, got {top}", k.min(20))));
            }
            let ranked = &anova_f_rank(train)[..*top];
            let all = (1u32..1 << top)
                .map(|mask| {
                    FeatureSubset::new((0..*top).filter(|b| mask >> b & 1 == 1).map(|b| ranked[b]), k)
                })
                .collect::<Result<Vec<_>>>()?;
            sort_subsets(all)
        }
        SubsetStrategy::AllOfSizeAtMost(size) => {
            if *size == 0 || *size > k || k > 20 {
                return Err(Error::Config(format!("subset size must be in 1..={k} with at most 20 features")));
            }
            let all = (1u32..1 << k)
                .filter(|m| m.count_ones() as usize <= *size)
                .map(|mask| FeatureSubset::new((0..k).filter(|b| mask >> b & 1 == 1), k))
                .collect::<Result<Vec<_>>>()?;
            sort_subsets(all)
        }
        SubsetStrategy::Sampled { singletons, pairs } => {
            let n_pairs = k * (k - 1) / 2;
            if *singletons > k || *pairs > n_pairs {
                return Err(Error::Config(format!(
                    "cannot sample {singletons} singletons and {pairs} pairs from {k} features"
                )));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut out: Vec<FeatureSubset> = sample(&mut rng, k, *singletons)
                .into_iter()
                .map(|i| FeatureSubset::new([i], k))
                .collect::<Result<_>>()?;
            for p in sample(&mut rng, n_pairs, *pairs) {
                // Decode the p-th pair (a, b), a < b, in row-major order.
                let (mut a, mut rest) = (0, p);
                while rest >= k - 1 - a {
                    rest -= k - 1 - a;
                    a += 1;
                }
                out.push(FeatureSubset::new([a, a + 1 + rest], k)?);
            }
            sort_subsets(out)
        }
        SubsetStrategy::Explicit(list) => {
            for s in list {
                if s.is_empty() {
                    return Err(Error::Config("empty feature subset".into()));
                }
                if let Some(bad) = s.iter().find(|&i| i >= k) {
                    return Err(Error::IndexOutOfRange { index: bad, arity: k });
                }
            }
            list.clone()
        }
    };
    if subsets.is_empty() {
        return Err(Error::Config("no feature subsets".into()));
    }
    Ok(subsets)
}

struct Slot {
    columns: Vec<bool>,
    /// Rows possessing every feature of the subset.
    eligible: Vec<bool>,
}

fn fit_member(
    encoder: &Arc<Encoder>,
    design: &Design,
    slot: &Slot,
    rows: impl Iterator<Item = usize>,
    cfg: &TrainConfig,
) -> Result<Member> {
    let rows: Vec<usize> = rows.filter(|&r| slot.eligible[r]).collect();
    if rows.is_empty() {
        return Ok(Member::Reject);
    }
    let sub = design.restrict(&rows, Some(&slot.columns));
    Ok(Member::Linear(LinearModel::fit(encoder.clone(), &sub, cfg, false)?))
}

fn member_predictions(member: &Member, design: &Design, slot: &Slot) -> Vec<u8> {
    (0..design.len())
        .map(|r| match member {
            Member::Linear(m) if slot.eligible[r] => {
                let z = design
                    .row(r)
                    .iter()
                    .fold(m.intercept(), |acc, &(c, v)| acc + m.coefficients()[c] * v);
                (z >= 0.0) as u8
            }
            _ => 0,
        })
        .collect()
}

/// Hill climbing: each member in turn is refit on the rows no other member
/// accepts, and kept only if it lowers the 0-1 loss on those rows.
pub fn hc_train(train: &Dataset, cfg: &HcConfig) -> Result<MaxEnsemble> {
    if train.is_empty() {
        return Err(Error::Empty("cannot train on an empty dataset".into()));
    }
    if cfg.delta.is_nan() || cfg.delta < 0.0 {
        return Err(Error::Config(format!("delta must be nonnegative, got {}", cfg.delta)));
    }
    let subsets = generate_subsets(train, &cfg.strategy, cfg.seed)?;
    let encoder = Arc::new(Encoder::fit(train, cfg.train.encoder)?);
    let design = Design::from_dataset(&encoder, train);
    let labels = design.labels().to_vec();
    let m = train.len();

    let slots: Vec<Slot> = subsets
        .iter()
        .map(|s| {
            let cols = encoder.columns_of(s);
            let mut columns = vec![false; encoder.width()];
            cols.iter().for_each(|&c| columns[c] = true);
            let eligible = train.rows().iter().map(|r| r.x.has_all(s)).collect();
            Slot { columns, eligible }
        })
        .collect();

    let mut members = Vec::with_capacity(subsets.len());
    let mut preds = Vec::with_capacity(subsets.len());
    for slot in &slots {
        let member = fit_member(&encoder, &design, slot, 0..m, &cfg.train)?;
        preds.push(member_predictions(&member, &design, slot));
        members.push(member);
    }
    let mut accepting: Vec<usize> = (0..m).map(|r| preds.iter().map(|p| p[r] as usize).sum()).collect();
    let errors = |accepting: &[usize]| (0..m).filter(|&r| (accepting[r] > 0) as u8 != labels[r]).count();
    let mut trace = vec![errors(&accepting)];

    let max_iterations = cfg.max_iterations.unwrap_or(m);
    for _ in 0..max_iterations {
        for i in 0..members.len() {
            let rest: Vec<usize> = (0..m).filter(|&r| accepting[r] == preds[i][r] as usize).collect();
            let loss_of = |p: &[u8]| rest.iter().filter(|&&r| p[r] != labels[r]).count();
            let candidate = fit_member(&encoder, &design, &slots[i], rest.iter().copied(), &cfg.train)?;
            let cand_preds = member_predictions(&candidate, &design, &slots[i]);
            if loss_of(&cand_preds) < loss_of(&preds[i]) {
                for r in 0..m {
                    accepting[r] = accepting[r] - preds[i][r] as usize + cand_preds[r] as usize;
                }
                members[i] = candidate;
                preds[i] = cand_preds;
            }
        }
        let prev = *trace.last().expect("trace starts nonempty");
        let now = errors(&accepting);
        trace.push(now);
        let gain = prev.saturating_sub(now);
        if gain == 0 || (gain as f64) / (m as f64) < cfg.delta {
            break;
        }
    }

    let members = subsets
        .into_iter()
        .zip(members)
        .map(|(subset, inner)| SubsetClassifier { subset, inner })
        .collect();
    Ok(MaxEnsemble { encoder, members, trace })
}
