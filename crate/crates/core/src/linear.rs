//! Logistic regression trained by full-batch gradient descent, and its
//! incentive-compatible variant that projects feature coefficients onto the
//! nonnegative orthant after every step.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::features::{check_row, Dataset, FeatureValue, FeatureVector};
use crate::strategic::Classifier;
use crate::textio::{esc, parse_f64, parse_usize, split_lines};
use crate::transform::{Encoder, EncoderConfig};

pub fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^t)` without overflow.
fn softplus(t: f64) -> f64 {
    t.max(0.0) + (-t.abs()).exp().ln_1p()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LearningRate {
    Constant(f64),
    /// `eta / sqrt(t)` at epoch `t`, counting from 1.
    InverseSqrt(f64),
}

impl LearningRate {
    pub fn at(&self, epoch: usize) -> f64 {
        match *self {
            LearningRate::Constant(eta) => eta,
            LearningRate::InverseSqrt(eta) => eta / (epoch as f64).sqrt(),
        }
    }

    /// Rate before any decay.
    pub fn base(&self) -> f64 {
        match *self {
            LearningRate::Constant(eta) | LearningRate::InverseSqrt(eta) => eta,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: LearningRate,
    pub max_epochs: usize,
    /// Minimum drop in training 0-1 loss (as a fraction of rows) that counts
    /// as an improvement.
    pub delta: f64,
    /// Training stops after this many epochs without an improvement.
    pub patience: usize,
    /// Also clamp the intercept at zero when projecting.
    pub clamp_intercept: bool,
    pub encoder: EncoderConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: LearningRate::Constant(0.1),
            max_epochs: 2000,
            delta: 0.0,
            patience: 200,
            clamp_intercept: false,
            encoder: EncoderConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let eta = self.learning_rate.base();
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::Config(format!("learning rate must be positive, got {eta}")));
        }
        if self.delta.is_nan() || self.delta < 0.0 {
            return Err(Error::Config(format!("delta must be nonnegative, got {}", self.delta)));
        }
        if self.max_epochs == 0 {
            return Err(Error::Config("max_epochs must be at least 1".into()));
        }
        Ok(())
    }
}

/// Sparse design matrix: nonzero `(column, value)` pairs per row.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Design {
    width: usize,
    rows: Vec<Vec<(usize, f64)>>,
    labels: Vec<u8>,
}

impl Design {
    pub fn from_dataset(encoder: &Encoder, data: &Dataset) -> Self {
        let rows = data
            .rows()
            .iter()
            .map(|r| {
                let mut row = Vec::new();
                encoder.for_each_nonzero(&r.x, |c, v| row.push((c, v)));
                row
            })
            .collect();
        let labels = data.rows().iter().map(|r| r.y).collect();
        Self { width: encoder.width(), rows, labels }
    }

    pub fn from_dense(rows: &[Vec<f64>], labels: &[u8]) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(Error::ArityMismatch { expected: rows.len(), got: labels.len() });
        }
        let width = rows.first().map_or(0, Vec::len);
        let mut sparse = Vec::with_capacity(rows.len());
        for r in rows {
            if r.len() != width {
                return Err(Error::ArityMismatch { expected: width, got: r.len() });
            }
            sparse.push(r.iter().copied().enumerate().filter(|&(_, v)| v != 0.0).collect());
        }
        Ok(Self { width, rows: sparse, labels: labels.to_vec() })
    }

    /// Keeps the listed rows and, when given, only the flagged columns.
    pub fn restrict(&self, rows: &[usize], columns: Option<&[bool]>) -> Self {
        let rows_out = rows
            .iter()
            .map(|&i| match columns {
                Some(keep) => self.rows[i].iter().copied().filter(|&(c, _)| keep[c]).collect(),
                None => self.rows[i].clone(),
            })
            .collect();
        let labels = rows.iter().map(|&i| self.labels[i]).collect();
        Self { width: self.width, rows: rows_out, labels }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    fn z(&self, i: usize, intercept: f64, coefs: &[f64]) -> f64 {
        self.rows[i].iter().fold(intercept, |acc, &(c, v)| acc + coefs[c] * v)
    }

    /// Number of rows misclassified by `1[z >= 0]`.
    pub fn errors(&self, intercept: f64, coefs: &[f64]) -> usize {
        (0..self.len())
            .filter(|&i| (self.z(i, intercept, coefs) >= 0.0) as u8 != self.labels[i])
            .count()
    }
}

/// Mean logistic loss.
pub fn log_loss(design: &Design, intercept: f64, coefs: &[f64]) -> f64 {
    if design.is_empty() {
        return 0.0;
    }
    let total: f64 = (0..design.len())
        .map(|i| {
            let z = design.z(i, intercept, coefs);
            softplus(z) - design.labels[i] as f64 * z
        })
        .sum();
    total / design.len() as f64
}

/// Gradient of [`log_loss`] as `(d/d intercept, d/d coefficients)`.
pub fn log_loss_gradient(design: &Design, intercept: f64, coefs: &[f64]) -> (f64, Vec<f64>) {
    let mut g0 = 0.0;
    let mut g = vec![0.0; coefs.len()];
    if design.is_empty() {
        return (g0, g);
    }
    for i in 0..design.len() {
        let r = sigmoid(design.z(i, intercept, coefs)) - design.labels[i] as f64;
        g0 += r;
        for &(c, v) in &design.rows[i] {
            g[c] += r * v;
        }
    }
    let n = design.len() as f64;
    g.iter_mut().for_each(|x| *x /= n);
    (g0 / n, g)
}

/// Clamps coefficients (and optionally the intercept) at zero.
pub fn project_nonnegative(intercept: &mut f64, coefs: &mut [f64], clamp_intercept: bool) {
    for b in coefs.iter_mut() {
        *b = b.max(0.0);
    }
    if clamp_intercept {
        *intercept = intercept.max(0.0);
    }
}

/// Gradient descent from zero. Returns `(intercept, coefficients)`.
pub fn fit_design(design: &Design, cfg: &TrainConfig, nonnegative: bool) -> Result<(f64, Vec<f64>)> {
    cfg.validate()?;
    let mut b0 = 0.0;
    let mut b = vec![0.0; design.width()];
    if design.is_empty() {
        return Ok((b0, b));
    }
    let n = design.len() as f64;
    let mut best = design.errors(b0, &b);
    let mut stale = 0;
    for epoch in 1..=cfg.max_epochs {
        let (g0, g) = log_loss_gradient(design, b0, &b);
        if !g0.is_finite() || g.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence(format!("non-finite gradient at epoch {epoch}")));
        }
        let eta = cfg.learning_rate.at(epoch);
        b0 -= eta * g0;
        for (bi, gi) in b.iter_mut().zip(&g) {
            *bi -= eta * gi;
        }
        if nonnegative {
            project_nonnegative(&mut b0, &mut b, cfg.clamp_intercept);
        }
        if !b0.is_finite() || b.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence(format!("non-finite parameters at epoch {epoch}")));
        }
        let errors = design.errors(b0, &b);
        if errors < best && (best - errors) as f64 / n > cfg.delta {
            best = errors;
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                break;
            }
        }
    }
    Ok((b0, b))
}

/// Linear scorer over an [`Encoder`]'s dense columns.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    intercept: f64,
    coefficients: Vec<f64>,
    encoder: Arc<Encoder>,
}

impl LinearModel {
    pub fn new(encoder: Arc<Encoder>, intercept: f64, coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.len() != encoder.width() {
            return Err(Error::ArityMismatch { expected: encoder.width(), got: coefficients.len() });
        }
        Ok(Self { intercept, coefficients, encoder })
    }

    /// A model whose score is `intercept` everywhere.
    pub fn constant(encoder: Arc<Encoder>, intercept: f64) -> Self {
        let coefficients = vec![0.0; encoder.width()];
        Self { intercept, coefficients, encoder }
    }

    pub fn fit(encoder: Arc<Encoder>, design: &Design, cfg: &TrainConfig, nonnegative: bool) -> Result<Self> {
        let (b0, b) = fit_design(design, cfg, nonnegative)?;
        Self::new(encoder, b0, b)
    }

    pub fn intercept(&self) -> f64 {
        self.intercept
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn encoder(&self) -> &Arc<Encoder> {
        &self.encoder
    }

    pub fn is_nonnegative(&self) -> bool {
        self.coefficients.iter().all(|&b| b >= 0.0)
    }

    pub fn score(&self, x: &FeatureVector) -> Result<f64> {
        check_row(self.encoder.input_schema(), x)?;
        Ok(self.score_unchecked(x))
    }

    pub(crate) fn score_unchecked(&self, x: &FeatureVector) -> f64 {
        let mut z = self.intercept;
        self.encoder.for_each_nonzero(x, |c, v| z += self.coefficients[c] * v);
        z
    }

    /// Share of the score contributed by raw attribute `i` at value `v`.
    pub fn feature_contribution(&self, i: usize, v: FeatureValue) -> f64 {
        let mut z = 0.0;
        self.encoder.encode_feature(i, v, &mut |c, w| z += self.coefficients[c] * w);
        z
    }

    pub fn to_text(&self) -> String {
        let mut lines = Vec::new();
        self.write_text(&mut lines);
        lines.join("\n") + "\n"
    }

    pub fn from_text(text: &str) -> Result<Self> {
        Self::read_text(&split_lines(text))
    }

    pub(crate) fn write_text(&self, out: &mut Vec<String>) {
        self.encoder.write_text(out);
        self.write_params(out);
    }

    pub(crate) fn write_params(&self, out: &mut Vec<String>) {
        out.push(format!("intercept\t{:?}", self.intercept));
        for (c, (b, name)) in self.coefficients.iter().zip(self.encoder.column_names()).enumerate() {
            out.push(format!("coef\t{c}\t{}\t{b:?}", esc(name)));
        }
    }

    pub(crate) fn read_text(lines: &[Vec<String>]) -> Result<Self> {
        let encoder = Arc::new(Encoder::read_text(lines)?);
        Self::read_params(encoder, lines)
    }

    pub(crate) fn read_params(encoder: Arc<Encoder>, lines: &[Vec<String>]) -> Result<Self> {
        let mut intercept = None;
        let mut coefficients = vec![0.0; encoder.width()];
        for f in lines {
            match f[0].as_str() {
                "intercept" => intercept = Some(parse_f64(f.get(1))?),
                "coef" => {
                    let c = parse_usize(f.get(1))?;
                    let slot = coefficients
                        .get_mut(c)
                        .ok_or(Error::IndexOutOfRange { index: c, arity: encoder.width() })?;
                    *slot = parse_f64(f.get(3))?;
                }
                _ => {}
            }
        }
        let intercept = intercept.ok_or_else(|| Error::Parse("model has no intercept".into()))?;
        Self::new(encoder, intercept, coefficients)
    }
}

impl Classifier for LinearModel {
    fn predict(&self, x: &FeatureVector) -> u8 {
        (self.score_unchecked(x) >= 0.0) as u8
    }

    fn proba(&self, x: &FeatureVector) -> Option<f64> {
        Some(sigmoid(self.score_unchecked(x)))
    }

    fn is_truthful(&self) -> bool {
        self.is_nonnegative()
    }
}

fn train(train: &Dataset, cfg: &TrainConfig, nonnegative: bool) -> Result<LinearModel> {
    if train.is_empty() {
        return Err(Error::Empty("cannot train on an empty dataset".into()));
    }
    let encoder = Arc::new(Encoder::fit(train, cfg.encoder)?);
    let design = Design::from_dataset(&encoder, train);
    LinearModel::fit(encoder, &design, cfg, nonnegative)
}

/// Unconstrained logistic regression.
pub fn train_logistic(data: &Dataset, cfg: &TrainConfig) -> Result<LinearModel> {
    train(data, cfg, false)
}

/// Logistic regression with nonnegative feature coefficients.
pub fn train_iclr(data: &Dataset, cfg: &TrainConfig) -> Result<LinearModel> {
    train(data, cfg, true)
}
