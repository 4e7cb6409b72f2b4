//! Non-strategic baselines: exact-match majority, mean/mode imputation with
//! logistic regression, and reduced-feature (one model per missingness
//! pattern) logistic regression. None of them is truthful.

use std::collections::HashMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::features::{Dataset, FeatureKind, FeatureSubset, FeatureValue, FeatureVector, LabeledExample};
use crate::linear::{train_logistic, Design, LinearModel, TrainConfig};
use crate::strategic::{best_response_imputed_linear, Classifier};
use crate::transform::Encoder;

/// Majority label among training rows with exactly the same vector; 0 for
/// unseen vectors and ties.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MajModel {
    table: HashMap<FeatureVector, u8>,
}

pub fn train_maj(train: &Dataset) -> MajModel {
    let mut counts: HashMap<&FeatureVector, (usize, usize)> = HashMap::new();
    for r in train.rows() {
        let c = counts.entry(&r.x).or_default();
        if r.y == 1 {
            c.1 += 1;
        } else {
            c.0 += 1;
        }
    }
    let table = counts.into_iter().map(|(x, (n, p))| (x.clone(), (p > n) as u8)).collect();
    MajModel { table }
}

impl MajModel {
    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }
}

impl Classifier for MajModel {
    fn predict(&self, x: &FeatureVector) -> u8 {
        self.table.get(x).copied().unwrap_or(0)
    }
}

/// Per-feature fill values: the mean of numeric features and the most
/// frequent level (smallest id on ties) of categoricals, over rows where the
/// feature is present. Features never observed stay missing.
pub fn impute_values(train: &Dataset) -> FeatureVector {
    let values = train
        .schema()
        .features()
        .iter()
        .enumerate()
        .map(|(i, spec)| {
            let present = train.rows().iter().map(|r| r.x.get(i)).filter(|v| v.is_present());
            match &spec.kind {
                FeatureKind::Numeric => {
                    let (sum, n) = present.filter_map(|v| v.as_f64()).fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
                    if n == 0 {
                        FeatureValue::Missing
                    } else {
                        FeatureValue::Numeric(sum / n as f64)
                    }
                }
                FeatureKind::Categorical { levels } => {
                    let mut counts = vec![0usize; levels.len()];
                    for v in present {
                        if let FeatureValue::Categorical(c) = v {
                            if let Some(slot) = counts.get_mut(c as usize) {
                                *slot += 1;
                            }
                        }
                    }
                    let best = counts.iter().copied().max().unwrap_or(0);
                    match counts.iter().position(|&c| c == best && c > 0) {
                        Some(l) => FeatureValue::Categorical(l as u32),
                        None => FeatureValue::Missing,
                    }
                }
            }
        })
        .collect();
    FeatureVector::new(values)
}

fn impute(x: &FeatureVector, fill: &FeatureVector) -> FeatureVector {
    let values = x
        .values()
        .iter()
        .zip(fill.values())
        .map(|(&v, &f)| if v.is_missing() { f } else { v })
        .collect();
    FeatureVector::new(values)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImputedLrModel {
    fill: FeatureVector,
    inner: LinearModel,
}

impl ImputedLrModel {
    pub fn fill_values(&self) -> &FeatureVector {
        &self.fill
    }

    pub fn inner(&self) -> &LinearModel {
        &self.inner
    }
}

pub fn train_imp_lr(train: &Dataset, cfg: &TrainConfig) -> Result<ImputedLrModel> {
    let fill = impute_values(train);
    let rows = train
        .rows()
        .iter()
        .map(|r| LabeledExample { x: impute(&r.x, &fill), y: r.y })
        .collect();
    let inner = train_logistic(&train.with_rows(rows), cfg)?;
    Ok(ImputedLrModel { fill, inner })
}

impl Classifier for ImputedLrModel {
    fn predict(&self, x: &FeatureVector) -> u8 {
        self.inner.predict(&impute(x, &self.fill))
    }

    fn proba(&self, x: &FeatureVector) -> Option<f64> {
        self.inner.proba(&impute(x, &self.fill))
    }

    fn best_response_hint(&self, x: &FeatureVector) -> Option<FeatureVector> {
        Some(best_response_imputed_linear(&self.inner, &self.fill, x))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PatternModel {
    Constant(u8),
    Linear(LinearModel),
}

/// One logistic model per present-feature pattern seen in training, each fit
/// on every training row that has all of the pattern's features.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedFeatureModel {
    per_pattern: HashMap<FeatureSubset, PatternModel>,
}

impl ReducedFeatureModel {
    pub fn patterns(&self) -> usize {
        self.per_pattern.len()
    }

    fn route(&self, x: &FeatureVector) -> Option<&PatternModel> {
        self.per_pattern.get(&x.pattern())
    }
}

pub fn train_rf_lr(train: &Dataset, cfg: &TrainConfig) -> Result<ReducedFeatureModel> {
    if train.is_empty() {
        return Err(Error::Empty("cannot train on an empty dataset".into()));
    }
    let encoder = Arc::new(Encoder::fit(train, cfg.encoder)?);
    let design = Design::from_dataset(&encoder, train);
    let mut patterns: Vec<FeatureSubset> = train.rows().iter().map(|r| r.x.pattern()).collect();
    patterns.sort();
    patterns.dedup();
    let mut per_pattern = HashMap::with_capacity(patterns.len());
    for p in patterns {
        let rows: Vec<usize> = (0..train.len()).filter(|&i| train.rows()[i].x.has_all(&p)).collect();
        let pos = rows.iter().filter(|&&i| train.rows()[i].y == 1).count();
        let model = if pos == 0 || pos == rows.len() {
            PatternModel::Constant((pos > 0) as u8)
        } else {
            let mut keep = vec![false; encoder.width()];
            encoder.columns_of(&p).into_iter().for_each(|c| keep[c] = true);
            let sub = design.restrict(&rows, Some(&keep));
            PatternModel::Linear(LinearModel::fit(encoder.clone(), &sub, cfg, false)?)
        };
        per_pattern.insert(p, model);
    }
    Ok(ReducedFeatureModel { per_pattern })
}

impl Classifier for ReducedFeatureModel {
    fn predict(&self, x: &FeatureVector) -> u8 {
        match self.route(x) {
            Some(PatternModel::Constant(y)) => *y,
            Some(PatternModel::Linear(m)) => m.predict(x),
            None => 0,
        }
    }

    fn proba(&self, x: &FeatureVector) -> Option<f64> {
        Some(match self.route(x) {
            Some(PatternModel::Constant(y)) => *y as f64,
            Some(PatternModel::Linear(m)) => m.proba(x).unwrap_or(0.0),
            None => 0.0,
        })
    }
}
