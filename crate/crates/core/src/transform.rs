//! Preprocessing transforms: nonnegative shift, inverted copies, MDLP
//! discretization, one-hot expansion, and the dense [`Encoder`] that chains
//! them for the linear models.
//!
//! Every derived column keeps the `origin` of the raw attribute it encodes.
//! Withholding a raw attribute blanks all of its derived columns at once.

use crate::error::{Error, Result};
use crate::features::{
    Dataset, FeatureKind, FeatureSchema, FeatureSpec, FeatureSubset, FeatureValue, FeatureVector,
    LabeledExample,
};
use crate::mdlp::{bin_index, discretize_mdlp};

fn map_rows<F>(data: &Dataset, schema: FeatureSchema, f: F) -> Result<Dataset>
where
    F: Fn(&FeatureVector) -> FeatureVector,
{
    let rows = data
        .rows()
        .iter()
        .map(|r| LabeledExample { x: f(&r.x), y: r.y })
        .collect();
    Dataset::new(schema, rows)
}

fn column_values(data: &Dataset, i: usize) -> impl Iterator<Item = f64> + '_ {
    data.rows().iter().filter_map(move |r| r.x.get(i).as_f64())
}

/// Per-feature min-shift making numeric values nonnegative.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftTransform {
    /// `Some(min)` for numeric features, `None` for categoricals.
    pub offsets: Vec<Option<f64>>,
}

impl ShiftTransform {
    pub fn fit(train: &Dataset) -> Self {
        let offsets = train
            .schema()
            .features()
            .iter()
            .enumerate()
            .map(|(i, f)| {
                f.kind
                    .is_numeric()
                    .then(|| column_values(train, i).fold(f64::INFINITY, f64::min))
                    .map(|m| if m.is_finite() { m } else { 0.0 })
            })
            .collect();
        Self { offsets }
    }

    /// Shifted value, clamped at zero for inputs below the training minimum.
    pub fn shift_value(&self, i: usize, v: f64) -> f64 {
        match self.offsets[i] {
            Some(o) => (v - o).max(0.0),
            None => v,
        }
    }

    pub fn apply(&self, x: &FeatureVector) -> FeatureVector {
        FeatureVector::new(
            x.values()
                .iter()
                .enumerate()
                .map(|(i, v)| match v {
                    FeatureValue::Numeric(n) => FeatureValue::Numeric(self.shift_value(i, *n)),
                    other => *other,
                })
                .collect(),
        )
    }
}

pub fn shift_nonnegative(train: &Dataset) -> Result<(ShiftTransform, Dataset)> {
    let t = ShiftTransform::fit(train);
    let out = map_rows(train, train.schema().clone(), |x| t.apply(x))?;
    Ok((t, out))
}

/// Appends `lambda - x_i` copies of selected nonnegative numeric features.
#[derive(Debug, Clone, PartialEq)]
pub struct InversionTransform {
    /// (source column, lambda)
    pub copies: Vec<(usize, f64)>,
    input: FeatureSchema,
    output: FeatureSchema,
}

impl InversionTransform {
    pub fn fit(train: &Dataset, which: &FeatureSubset) -> Result<Self> {
        let schema = train.schema();
        let mut copies = Vec::new();
        for i in which.iter() {
            if i >= schema.len() {
                return Err(Error::IndexOutOfRange { index: i, arity: schema.len() });
            }
            if !schema.feature(i).kind.is_numeric() {
                return Err(Error::Type(format!(
                    "cannot invert categorical feature '{}'",
                    schema.feature(i).name
                )));
            }
            let mut lambda = 0.0f64;
            for v in column_values(train, i) {
                if v < 0.0 {
                    return Err(Error::Type(format!(
                        "feature '{}' has negative value {v}; shift before inverting",
                        schema.feature(i).name
                    )));
                }
                lambda = lambda.max(v);
            }
            copies.push((i, lambda));
        }
        Self::from_parts(schema.clone(), copies)
    }

    pub fn from_parts(input: FeatureSchema, copies: Vec<(usize, f64)>) -> Result<Self> {
        let mut specs = input.features().to_vec();
        for &(i, _) in &copies {
            let src = input.feature(i);
            specs.push(FeatureSpec {
                name: format!("{}~inv", src.name),
                kind: FeatureKind::Numeric,
                origin: src.origin,
            });
        }
        let output = FeatureSchema::from_specs(specs)?;
        Ok(Self { copies, input, output })
    }

    pub fn output_schema(&self) -> &FeatureSchema {
        &self.output
    }

    pub fn input_schema(&self) -> &FeatureSchema {
        &self.input
    }

    pub fn apply(&self, x: &FeatureVector) -> FeatureVector {
        let mut values = x.values().to_vec();
        for &(i, lambda) in &self.copies {
            values.push(match x.get(i) {
                FeatureValue::Numeric(v) => FeatureValue::Numeric((lambda - v).max(0.0)),
                _ => FeatureValue::Missing,
            });
        }
        FeatureVector::new(values)
    }
}

pub fn invert_features(
    train: &Dataset,
    which: &FeatureSubset,
) -> Result<(InversionTransform, Dataset)> {
    let t = InversionTransform::fit(train, which)?;
    let out = map_rows(train, t.output.clone(), |x| t.apply(x))?;
    Ok((t, out))
}

/// One-hot image of a value under sorted `cuts`: `cuts.len() + 1` binary
/// features, all missing when the value is missing.
pub fn bin_apply(value: FeatureValue, cuts: &[f64]) -> Vec<FeatureValue> {
    let width = cuts.len() + 1;
    match value.as_f64() {
        Some(v) => {
            let b = bin_index(v, cuts);
            (0..width)
                .map(|j| FeatureValue::Numeric(if j == b { 1.0 } else { 0.0 }))
                .collect()
        }
        None => vec![FeatureValue::Missing; width],
    }
}

fn bin_labels(cuts: &[f64]) -> Vec<String> {
    (0..=cuts.len())
        .map(|j| match (j.checked_sub(1).map(|p| cuts[p]), cuts.get(j)) {
            (None, Some(hi)) => format!("<{hi}"),
            (Some(lo), Some(hi)) => format!("[{lo},{hi})"),
            (Some(lo), None) => format!(">={lo}"),
            (None, None) => "all".to_string(),
        })
        .collect()
}

/// MDLP cut points for numeric features; turns them into categorical bins.
#[derive(Debug, Clone, PartialEq)]
pub struct Discretizer {
    /// `Some(cuts)` for discretized numeric features.
    pub cuts: Vec<Option<Vec<f64>>>,
    output: FeatureSchema,
}

impl Discretizer {
    pub fn fit(train: &Dataset) -> Result<Self> {
        let cuts = train
            .schema()
            .features()
            .iter()
            .enumerate()
            .map(|(i, f)| {
                f.kind.is_numeric().then(|| {
                    let column: Vec<(Option<f64>, u8)> =
                        train.rows().iter().map(|r| (r.x.get(i).as_f64(), r.y)).collect();
                    discretize_mdlp(&column)
                })
            })
            .collect();
        Self::from_cuts(train.schema(), cuts)
    }

    pub fn from_cuts(input: &FeatureSchema, cuts: Vec<Option<Vec<f64>>>) -> Result<Self> {
        if cuts.len() != input.len() {
            return Err(Error::ArityMismatch { expected: input.len(), got: cuts.len() });
        }
        let specs = input
            .features()
            .iter()
            .zip(&cuts)
            .map(|(f, c)| FeatureSpec {
                name: f.name.clone(),
                kind: match c {
                    Some(c) => FeatureKind::Categorical { levels: bin_labels(c) },
                    None => f.kind.clone(),
                },
                origin: f.origin,
            })
            .collect();
        Ok(Self { cuts, output: FeatureSchema::from_specs(specs)? })
    }

    pub fn output_schema(&self) -> &FeatureSchema {
        &self.output
    }

    pub fn apply(&self, x: &FeatureVector) -> FeatureVector {
        FeatureVector::new(
            x.values()
                .iter()
                .zip(&self.cuts)
                .map(|(v, c)| match (v, c) {
                    (FeatureValue::Numeric(n), Some(c)) => {
                        FeatureValue::Categorical(bin_index(*n, c) as u32)
                    }
                    (v, _) => *v,
                })
                .collect(),
        )
    }

    pub fn apply_dataset(&self, data: &Dataset) -> Result<Dataset> {
        map_rows(data, self.output.clone(), |x| self.apply(x))
    }
}

/// How one raw attribute maps onto dense columns.
#[derive(Debug, Clone, PartialEq)]
enum ColumnCode {
    /// `max(v - offset, 0) / scale`, plus an optional inverted copy
    /// `max(lambda - scaled, 0)`.
    Numeric { offset: f64, scale: f64, invert: Option<f64> },
    OneHot { levels: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EncoderConfig {
    /// Discretize numeric features with MDLP before encoding.
    pub discretize: bool,
    /// Append an inverted copy of each numeric feature.
    pub invert_numeric: bool,
}

/// Dense nonnegative encoding used by every linear model.
///
/// Pipeline: optional MDLP binning, nonnegative shift, max-scaling to
/// `[0, 1]` on the training data, optional inverted copies, and one-hot
/// expansion of categoricals. Missing attributes encode as all-zero columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoder {
    input: FeatureSchema,
    discretizer: Option<Discretizer>,
    codes: Vec<ColumnCode>,
    /// Starting dense column of each raw attribute.
    starts: Vec<usize>,
    columns: Vec<String>,
    origins: Vec<usize>,
}

impl Encoder {
    pub fn fit(train: &Dataset, cfg: EncoderConfig) -> Result<Self> {
        let discretizer = if cfg.discretize { Some(Discretizer::fit(train)?) } else { None };
        let staged = match &discretizer {
            Some(d) => d.apply_dataset(train)?,
            None => train.clone(),
        };
        let shift = ShiftTransform::fit(&staged);
        let codes = staged
            .schema()
            .features()
            .iter()
            .enumerate()
            .map(|(i, f)| match &f.kind {
                FeatureKind::Numeric => {
                    let offset = shift.offsets[i].unwrap_or(0.0);
                    let max = column_values(&staged, i)
                        .map(|v| shift.shift_value(i, v))
                        .fold(0.0f64, f64::max);
                    let scale = if max > 0.0 { max } else { 1.0 };
                    let invert = cfg.invert_numeric.then_some(max / scale);
                    ColumnCode::Numeric { offset, scale, invert }
                }
                FeatureKind::Categorical { levels } => ColumnCode::OneHot { levels: levels.len() },
            })
            .collect();
        Self::assemble(train.schema().clone(), discretizer, codes)
    }

    fn assemble(
        input: FeatureSchema,
        discretizer: Option<Discretizer>,
        codes: Vec<ColumnCode>,
    ) -> Result<Self> {
        if codes.len() != input.len() {
            return Err(Error::ArityMismatch { expected: input.len(), got: codes.len() });
        }
        let staged_schema = discretizer.as_ref().map_or(&input, |d| d.output_schema());
        let mut starts = Vec::with_capacity(codes.len());
        let mut columns = Vec::new();
        let mut origins = Vec::new();
        for (i, (code, spec)) in codes.iter().zip(staged_schema.features()).enumerate() {
            starts.push(columns.len());
            match code {
                ColumnCode::Numeric { invert, .. } => {
                    columns.push(spec.name.clone());
                    origins.push(i);
                    if invert.is_some() {
                        columns.push(format!("{}~inv", spec.name));
                        origins.push(i);
                    }
                }
                ColumnCode::OneHot { levels } => {
                    let names = match &spec.kind {
                        FeatureKind::Categorical { levels } => levels.clone(),
                        FeatureKind::Numeric => (0..*levels).map(|l| l.to_string()).collect(),
                    };
                    for name in names.iter().take(*levels) {
                        columns.push(format!("{}={name}", spec.name));
                        origins.push(i);
                    }
                }
            }
        }
        Ok(Self { input, discretizer, codes, starts, columns, origins })
    }

    pub fn input_schema(&self) -> &FeatureSchema {
        &self.input
    }

    pub fn width(&self) -> usize {
        self.columns.len()
    }

    pub fn column_names(&self) -> &[String] {
        &self.columns
    }

    /// Raw attribute index of each dense column.
    pub fn origins(&self) -> &[usize] {
        &self.origins
    }

    /// Dense columns derived from the raw attributes in `subset`.
    pub fn columns_of(&self, subset: &FeatureSubset) -> Vec<usize> {
        (0..self.width()).filter(|&c| subset.contains(self.origins[c])).collect()
    }

    pub fn discretizer(&self) -> Option<&Discretizer> {
        self.discretizer.as_ref()
    }

    /// Calls `sink(column, value)` for every nonzero dense column of `x`.
    pub fn for_each_nonzero<F: FnMut(usize, f64)>(&self, x: &FeatureVector, mut sink: F) {
        for i in 0..self.codes.len() {
            self.encode_feature(i, x.get(i), &mut sink);
        }
    }

    /// Dense image of raw attribute `i` taking value `v`.
    pub fn encode_feature<F: FnMut(usize, f64)>(&self, i: usize, v: FeatureValue, sink: &mut F) {
        let mut v = v;
        if let (Some(d), FeatureValue::Numeric(n)) = (&self.discretizer, v) {
            if let Some(c) = &d.cuts[i] {
                v = FeatureValue::Categorical(bin_index(n, c) as u32);
            }
        }
        let start = self.starts[i];
        match (&self.codes[i], v) {
            (_, FeatureValue::Missing) => {}
            (ColumnCode::Numeric { offset, scale, invert }, FeatureValue::Numeric(n)) => {
                let s = (n - offset).max(0.0) / scale;
                if s != 0.0 {
                    sink(start, s);
                }
                if let Some(lambda) = invert {
                    let inv = (lambda - s).max(0.0);
                    if inv != 0.0 {
                        sink(start + 1, inv);
                    }
                }
            }
            // Unseen symbols encode like a missing value.
            (ColumnCode::OneHot { levels }, FeatureValue::Categorical(c)) if (c as usize) < *levels => {
                sink(start + c as usize, 1.0);
            }
            _ => {}
        }
    }

    pub fn encode(&self, x: &FeatureVector) -> Vec<f64> {
        let mut out = vec![0.0; self.width()];
        self.for_each_nonzero(x, |c, v| out[c] = v);
        out
    }

    pub fn encode_dataset(&self, data: &Dataset) -> Vec<Vec<f64>> {
        data.rows().iter().map(|r| self.encode(&r.x)).collect()
    }

    pub(crate) fn write_text(&self, out: &mut Vec<String>) {
        use crate::textio::esc;
        for f in self.input.features() {
            match &f.kind {
                FeatureKind::Numeric => out.push(format!("input\t{}\tnumeric", esc(&f.name))),
                FeatureKind::Categorical { levels } => {
                    let mut line = format!("input\t{}\tcategorical", esc(&f.name));
                    for l in levels {
                        line.push('\t');
                        line.push_str(&esc(l));
                    }
                    out.push(line);
                }
            }
        }
        if let Some(d) = &self.discretizer {
            for (i, c) in d.cuts.iter().enumerate() {
                if let Some(c) = c {
                    let mut line = format!("cuts\t{i}");
                    for v in c {
                        line.push_str(&format!("\t{v:?}"));
                    }
                    out.push(line);
                }
            }
        }
        for (i, code) in self.codes.iter().enumerate() {
            match code {
                ColumnCode::Numeric { offset, scale, invert } => {
                    out.push(format!("shift\t{i}\t{offset:?}"));
                    out.push(format!("scale\t{i}\t{scale:?}"));
                    if let Some(l) = invert {
                        out.push(format!("invert\t{i}\t{l:?}"));
                    }
                }
                ColumnCode::OneHot { levels } => out.push(format!("onehot\t{i}\t{levels}")),
            }
        }
    }

    pub(crate) fn read_text(lines: &[Vec<String>]) -> Result<Self> {
        use crate::textio::{parse_f64, parse_usize};
        let mut inputs = Vec::new();
        let mut cuts: Vec<(usize, Vec<f64>)> = Vec::new();
        let mut shift = std::collections::BTreeMap::new();
        let mut scale = std::collections::BTreeMap::new();
        let mut invert = std::collections::BTreeMap::new();
        let mut onehot = std::collections::BTreeMap::new();
        for f in lines {
            match f[0].as_str() {
                "input" => {
                    let name = f.get(1).ok_or_else(|| Error::Parse("input without name".into()))?;
                    let kind = match f.get(2).map(String::as_str) {
                        Some("numeric") => FeatureKind::Numeric,
                        Some("categorical") => {
                            FeatureKind::Categorical { levels: f[3..].to_vec() }
                        }
                        other => return Err(Error::Parse(format!("bad input kind {other:?}"))),
                    };
                    inputs.push((name.clone(), kind));
                }
                "cuts" => cuts.push((
                    parse_usize(f.get(1))?,
                    f[2..].iter().map(|s| parse_f64(Some(s))).collect::<Result<_>>()?,
                )),
                "shift" => {
                    shift.insert(parse_usize(f.get(1))?, parse_f64(f.get(2))?);
                }
                "scale" => {
                    scale.insert(parse_usize(f.get(1))?, parse_f64(f.get(2))?);
                }
                "invert" => {
                    invert.insert(parse_usize(f.get(1))?, parse_f64(f.get(2))?);
                }
                "onehot" => {
                    onehot.insert(parse_usize(f.get(1))?, parse_usize(f.get(2))?);
                }
                _ => {}
            }
        }
        let input = FeatureSchema::new(inputs)?;
        let discretizer = if cuts.is_empty() {
            None
        } else {
            let mut all = vec![None; input.len()];
            for (i, c) in cuts {
                *all.get_mut(i).ok_or(Error::IndexOutOfRange { index: i, arity: input.len() })? =
                    Some(c);
            }
            Some(Discretizer::from_cuts(&input, all)?)
        };
        let codes = (0..input.len())
            .map(|i| {
                if let Some(&levels) = onehot.get(&i) {
                    Ok(ColumnCode::OneHot { levels })
                } else {
                    Ok(ColumnCode::Numeric {
                        offset: *shift
                            .get(&i)
                            .ok_or_else(|| Error::Parse(format!("no encoding for input {i}")))?,
                        scale: *scale.get(&i).unwrap_or(&1.0),
                        invert: invert.get(&i).copied(),
                    })
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Self::assemble(input, discretizer, codes)
    }
}
