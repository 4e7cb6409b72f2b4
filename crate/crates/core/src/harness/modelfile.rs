//! Saved models for the `train`, `evaluate` and `audit` commands.
//!
//! Every file starts with a `model\t<kind>` line followed by the
//! tab-separated text of the model itself.

use crate::ensemble::{hc_train, HcConfig, MaxEnsemble};
use crate::error::{Error, Result};
use crate::features::{Dataset, FeatureKind, FeatureSchema, FeatureValue, FeatureVector};
use crate::harness::experiment::{ClassifierKind, ExperimentConfig};
use crate::linear::{train_iclr, train_logistic, LinearModel};
use crate::mincut::{train_mincut, MincutClassifier};
use crate::strategic::Classifier;
use crate::textio::{esc, parse_f64, parse_usize, split_lines};
use crate::transform::Discretizer;

/// Mincut over optionally binned inputs. Binning commutes with withholding,
/// so the wrapper stays truthful.
#[derive(Debug, Clone, PartialEq)]
pub struct BinnedMincut {
    pub input: FeatureSchema,
    pub discretizer: Option<Discretizer>,
    pub inner: MincutClassifier,
}

impl Classifier for BinnedMincut {
    fn predict(&self, x: &FeatureVector) -> u8 {
        match &self.discretizer {
            Some(d) => self.inner.predict(&d.apply(x)),
            None => self.inner.predict(x),
        }
    }

    fn proba(&self, x: &FeatureVector) -> Option<f64> {
        Some(self.predict(x) as f64)
    }

    fn is_truthful(&self) -> bool {
        true
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SavedModel {
    Linear { kind: ClassifierKind, model: LinearModel },
    Ensemble(MaxEnsemble),
    Mincut(BinnedMincut),
}

fn tag(kind: ClassifierKind) -> &'static str {
    match kind {
        ClassifierKind::Lr => "lr",
        ClassifierKind::Iclr => "iclr",
        ClassifierKind::Hc => "hc",
        ClassifierKind::Mincut => "mincut",
        ClassifierKind::Maj => "maj",
        ClassifierKind::ImpLr => "imp",
        ClassifierKind::RfLr => "rf",
    }
}

fn write_value(v: FeatureValue) -> String {
    match v {
        FeatureValue::Missing => "*".into(),
        FeatureValue::Numeric(n) => format!("n{n:?}"),
        FeatureValue::Categorical(c) => format!("c{c}"),
    }
}

fn read_value(s: &str) -> Result<FeatureValue> {
    let bad = || Error::Parse(format!("bad cell '{s}'"));
    match s.split_at_checked(1) {
        Some(("*", "")) => Ok(FeatureValue::Missing),
        Some(("n", rest)) => FeatureValue::numeric(rest.parse().map_err(|_| bad())?),
        Some(("c", rest)) => Ok(FeatureValue::Categorical(rest.parse().map_err(|_| bad())?)),
        _ => Err(bad()),
    }
}

fn write_schema(schema: &FeatureSchema, out: &mut Vec<String>) {
    for f in schema.features() {
        match &f.kind {
            FeatureKind::Numeric => out.push(format!("input\t{}\tnumeric", esc(&f.name))),
            FeatureKind::Categorical { levels } => {
                let levels: Vec<String> = levels.iter().map(|l| esc(l)).collect();
                out.push(format!("input\t{}\tcategorical\t{}", esc(&f.name), levels.join("\t")));
            }
        }
    }
}

fn read_schema(lines: &[Vec<String>]) -> Result<FeatureSchema> {
    let mut specs = Vec::new();
    for f in lines.iter().filter(|f| f[0] == "input") {
        let name = f.get(1).ok_or_else(|| Error::Parse("input without name".into()))?;
        let kind = match f.get(2).map(String::as_str) {
            Some("numeric") => FeatureKind::Numeric,
            Some("categorical") => FeatureKind::Categorical { levels: f[3..].to_vec() },
            other => return Err(Error::Parse(format!("bad input kind {other:?}"))),
        };
        specs.push((name.clone(), kind));
    }
    FeatureSchema::new(specs)
}

impl BinnedMincut {
    fn write_text(&self, out: &mut Vec<String>) {
        write_schema(&self.input, out);
        if let Some(d) = &self.discretizer {
            for (i, c) in d.cuts.iter().enumerate() {
                if let Some(c) = c {
                    let cuts: Vec<String> = c.iter().map(|v| format!("{v:?}")).collect();
                    out.push(format!("cuts\t{i}\t{}", cuts.join("\t")));
                }
            }
        }
        let vec_line = |head: &str, x: &FeatureVector| {
            let cells: Vec<String> = x.values().iter().map(|&v| write_value(v)).collect();
            format!("{head}\t{}", cells.join("\t"))
        };
        for x in self.inner.training_vectors() {
            out.push(vec_line("seen", x));
        }
        for x in self.inner.accepted() {
            out.push(vec_line("accept", x));
        }
    }

    fn read_text(lines: &[Vec<String>]) -> Result<Self> {
        let input = read_schema(lines)?;
        let mut cuts = vec![None; input.len()];
        let mut any_cuts = false;
        let mut seen = Vec::new();
        let mut accepted = Vec::new();
        for f in lines {
            let vector = || -> Result<FeatureVector> {
                let values = f[1..].iter().map(|s| read_value(s)).collect::<Result<Vec<_>>>()?;
                if values.len() != input.len() {
                    return Err(Error::ArityMismatch { expected: input.len(), got: values.len() });
                }
                Ok(FeatureVector::new(values))
            };
            match f[0].as_str() {
                "cuts" => {
                    let i = parse_usize(f.get(1))?;
                    let c = f[2..].iter().map(|s| parse_f64(Some(s))).collect::<Result<Vec<_>>>()?;
                    *cuts.get_mut(i).ok_or(Error::IndexOutOfRange { index: i, arity: input.len() })? = Some(c);
                    any_cuts = true;
                }
                "seen" => seen.push(vector()?),
                "accept" => accepted.push(vector()?),
                _ => {}
            }
        }
        let discretizer = if any_cuts { Some(Discretizer::from_cuts(&input, cuts)?) } else { None };
        Ok(Self { input, discretizer, inner: MincutClassifier::from_accepted(accepted, seen) })
    }
}

impl SavedModel {
    pub fn kind(&self) -> ClassifierKind {
        match self {
            SavedModel::Linear { kind, .. } => *kind,
            SavedModel::Ensemble(_) => ClassifierKind::Hc,
            SavedModel::Mincut(_) => ClassifierKind::Mincut,
        }
    }

    /// Raw attributes the model reads.
    pub fn input_schema(&self) -> &FeatureSchema {
        match self {
            SavedModel::Linear { model, .. } => model.encoder().input_schema(),
            SavedModel::Ensemble(e) => e.encoder().input_schema(),
            SavedModel::Mincut(m) => &m.input,
        }
    }

    pub fn classifier(&self) -> &dyn Classifier {
        match self {
            SavedModel::Linear { model, .. } => model,
            SavedModel::Ensemble(e) => e,
            SavedModel::Mincut(m) => m,
        }
    }

    pub fn to_text(&self) -> String {
        let body = match self {
            SavedModel::Linear { model, .. } => model.to_text(),
            SavedModel::Ensemble(e) => e.to_text(),
            SavedModel::Mincut(m) => {
                let mut out = Vec::new();
                m.write_text(&mut out);
                out.join("\n") + "\n"
            }
        };
        format!("model\t{}\n{body}", tag(self.kind()))
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let lines = split_lines(text);
        let head = lines
            .first()
            .filter(|f| f[0] == "model")
            .and_then(|f| f.get(1))
            .ok_or_else(|| Error::Parse("model file must start with a model line".into()))?;
        Ok(match head.as_str() {
            "lr" => SavedModel::Linear { kind: ClassifierKind::Lr, model: LinearModel::from_text(text)? },
            "iclr" => SavedModel::Linear { kind: ClassifierKind::Iclr, model: LinearModel::from_text(text)? },
            "hc" => SavedModel::Ensemble(MaxEnsemble::from_text(text)?),
            "mincut" => SavedModel::Mincut(BinnedMincut::read_text(&lines)?),
            other => return Err(Error::Parse(format!("unknown model kind '{other}'"))),
        })
    }
}

/// Trains a model that can be written to disk. Only LR, IC-LR, HC and
/// Mincut have a file format.
pub fn train_saved(kind: ClassifierKind, data: &Dataset, cfg: &ExperimentConfig, seed: u64) -> Result<SavedModel> {
    match kind {
        ClassifierKind::Lr | ClassifierKind::Iclr => {
            let mut tc = cfg.train.clone();
            tc.encoder.discretize = cfg.discretize;
            if kind == ClassifierKind::Iclr {
                tc.encoder.invert_numeric = cfg.iclr_invert;
            }
            let model = if kind == ClassifierKind::Lr { train_logistic(data, &tc)? } else { train_iclr(data, &tc)? };
            Ok(SavedModel::Linear { kind, model })
        }
        ClassifierKind::Hc => {
            let mut train = cfg.train.clone();
            train.encoder.discretize = cfg.discretize;
            let hc = HcConfig {
                strategy: ExperimentConfig::hc_strategy(data.arity()),
                delta: cfg.hc_delta,
                max_iterations: None,
                seed,
                train,
            };
            Ok(SavedModel::Ensemble(hc_train(data, &hc)?))
        }
        ClassifierKind::Mincut => {
            let (discretizer, binned) = if cfg.discretize {
                let d = Discretizer::fit(data)?;
                let b = d.apply_dataset(data)?;
                (Some(d), b)
            } else {
                (None, data.clone())
            };
            Ok(SavedModel::Mincut(BinnedMincut {
                input: data.schema().clone(),
                discretizer,
                inner: train_mincut(&binned)?,
            }))
        }
        other => Err(Error::Config(format!("{other} has no model file format; use the experiment command"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::LabeledExample;
    use crate::harness::example1;

    #[test]
    fn mincut_round_trip() {
        let data = example1::dataset();
        let cfg = ExperimentConfig::default();
        let m = train_saved(ClassifierKind::Mincut, &data, &cfg, 0).unwrap();
        let back = SavedModel::from_text(&m.to_text()).unwrap();
        assert_eq!(back, m);
        for r in data.rows() {
            assert_eq!(back.classifier().predict(&r.x), m.classifier().predict(&r.x));
        }
    }

    #[test]
    fn binned_mincut_and_linear_round_trip() {
        let rows = (0..60)
            .map(|i| {
                let v = i as f64 / 60.0;
                let x = if i % 7 == 0 { FeatureValue::Missing } else { FeatureValue::Numeric(v) };
                LabeledExample { x: FeatureVector::new(vec![x, FeatureValue::Numeric((i % 5) as f64)]), y: (v > 0.5) as u8 }
            })
            .collect();
        let data = Dataset::new(FeatureSchema::numeric(2).unwrap(), rows).unwrap();
        let cfg = ExperimentConfig { discretize: true, ..ExperimentConfig::default() };
        for kind in [ClassifierKind::Mincut, ClassifierKind::Iclr, ClassifierKind::Lr, ClassifierKind::Hc] {
            let m = train_saved(kind, &data, &cfg, 1).unwrap();
            let back = SavedModel::from_text(&m.to_text()).unwrap();
            assert_eq!(back.kind(), kind);
            assert_eq!(back.input_schema(), data.schema());
            for r in data.rows() {
                assert_eq!(back.classifier().predict(&r.x), m.classifier().predict(&r.x), "{kind}");
            }
        }
        assert!(train_saved(ClassifierKind::Maj, &data, &cfg, 0).is_err());
        assert!(SavedModel::from_text("intercept\t0.0\n").is_err());
    }
}
