//! CSV ingestion with typed columns and configurable missing tokens.

use std::fs::File;
use std::io::Read;
use std::path::Path;

use indexmap::IndexSet;

use crate::error::{Error, Result};
use crate::features::{Dataset, FeatureKind, FeatureSchema, FeatureValue, FeatureVector, LabeledExample};

#[derive(Debug, Clone, PartialEq)]
pub struct CsvOptions {
    /// Label column name; the last column when `None`.
    pub label: Option<String>,
    pub missing_tokens: Vec<String>,
    /// Columns read as categorical even when every value parses as a number.
    pub categorical: Vec<String>,
    /// Label value mapped to 1; every other value maps to 0. When `None`,
    /// only the usual spellings (`1/0`, `+/-`, `positive/negative`, ...) are
    /// accepted.
    pub positive: Option<String>,
}

impl Default for CsvOptions {
    fn default() -> Self {
        Self {
            label: None,
            missing_tokens: vec!["?".into(), "".into(), "NA".into()],
            categorical: Vec::new(),
            positive: None,
        }
    }
}

fn parse_label(s: &str, positive: Option<&str>) -> Result<u8> {
    if let Some(p) = positive {
        return Ok((s == p) as u8);
    }
    match s.to_ascii_lowercase().as_str() {
        "1" | "+" | "+1" | "positive" | "pos" | "yes" | "true" | "good" => Ok(1),
        "0" | "-" | "-1" | "negative" | "neg" | "no" | "false" | "bad" => Ok(0),
        _ => Err(Error::Parse(format!("unknown label value '{s}'"))),
    }
}

pub fn load_csv(path: impl AsRef<Path>, opts: &CsvOptions) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    read_csv(file, opts)
}

struct Table {
    header: Vec<String>,
    label_col: usize,
    cells: Vec<Vec<String>>,
}

fn read_table<R: Read>(reader: R, opts: &CsvOptions) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header.len() < 2 {
        return Err(Error::Schema("need at least one feature column and a label column".into()));
    }
    let label_col = match &opts.label {
        Some(name) => header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema(format!("label column '{name}' not found")))?,
        None => header.len() - 1,
    };
    let mut cells = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() != header.len() {
            return Err(Error::Parse(format!(
                "row {}: expected {} fields, got {}",
                line + 2,
                header.len(),
                rec.len()
            )));
        }
        cells.push(rec.iter().map(str::to_string).collect());
    }
    Ok(Table { header, label_col, cells })
}

/// Reads a CSV with a header row. Numeric columns are those whose
/// non-missing cells all parse as finite numbers; categorical levels are
/// numbered by first appearance.
pub fn read_csv<R: Read>(reader: R, opts: &CsvOptions) -> Result<Dataset> {
    let t = read_table(reader, opts)?;
    let missing = |s: &str| opts.missing_tokens.iter().any(|m| m == s);
    let feature_cols: Vec<usize> = (0..t.header.len()).filter(|&c| c != t.label_col).collect();
    for name in &opts.categorical {
        if !t.header.iter().any(|h| h == name) {
            return Err(Error::Schema(format!("categorical column '{name}' not found")));
        }
    }
    let mut specs = Vec::new();
    let mut levels: Vec<Option<IndexSet<String>>> = Vec::new();
    for &c in &feature_cols {
        let name = t.header[c].clone();
        let numeric = !opts.categorical.contains(&name)
            && t.cells.iter().all(|r| missing(&r[c]) || r[c].parse::<f64>().is_ok_and(f64::is_finite));
        if numeric {
            specs.push((name, FeatureKind::Numeric));
            levels.push(None);
        } else {
            let set: IndexSet<String> =
                t.cells.iter().filter(|r| !missing(&r[c])).map(|r| r[c].clone()).collect();
            specs.push((name, FeatureKind::Categorical { levels: set.iter().cloned().collect() }));
            levels.push(Some(set));
        }
    }
    let schema = FeatureSchema::new(specs)?;
    let mut rows = Vec::with_capacity(t.cells.len());
    for (line, r) in t.cells.iter().enumerate() {
        let values = feature_cols
            .iter()
            .zip(&levels)
            .map(|(&c, lv)| {
                let s = &r[c];
                if missing(s) {
                    return Ok(FeatureValue::Missing);
                }
                match lv {
                    None => FeatureValue::numeric(s.parse().expect("checked numeric")),
                    Some(set) => Ok(FeatureValue::Categorical(
                        set.get_index_of(s).expect("level interned") as u32,
                    )),
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let y = parse_label(&r[t.label_col], opts.positive.as_deref())
            .map_err(|e| Error::Parse(format!("row {}: {e}", line + 2)))?;
        rows.push(LabeledExample { x: FeatureVector::new(values), y });
    }
    Dataset::new(schema, rows)
}

/// Reads rows against an existing schema, e.g. test data for a saved model.
/// Columns are matched by name; unknown categorical levels are an error.
pub fn read_csv_with_schema<R: Read>(reader: R, opts: &CsvOptions, schema: &FeatureSchema) -> Result<Dataset> {
    let t = read_table(reader, opts)?;
    let missing = |s: &str| opts.missing_tokens.iter().any(|m| m == s);
    let cols = schema
        .features()
        .iter()
        .map(|f| {
            t.header
                .iter()
                .position(|h| *h == f.name)
                .ok_or_else(|| Error::Schema(format!("column '{}' not found", f.name)))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::with_capacity(t.cells.len());
    for (line, r) in t.cells.iter().enumerate() {
        let values = cols
            .iter()
            .zip(schema.features())
            .map(|(&c, spec)| {
                let s = &r[c];
                if missing(s) {
                    return Ok(FeatureValue::Missing);
                }
                match &spec.kind {
                    FeatureKind::Numeric => {
                        let v = s.parse::<f64>().map_err(|_| {
                            Error::Parse(format!("row {}: bad number '{s}' in '{}'", line + 2, spec.name))
                        })?;
                        FeatureValue::numeric(v)
                    }
                    FeatureKind::Categorical { levels } => levels
                        .iter()
                        .position(|l| l == s)
                        .map(|i| FeatureValue::Categorical(i as u32))
                        .ok_or_else(|| {
                            Error::Parse(format!("row {}: unknown level '{s}' in '{}'", line + 2, spec.name))
                        }),
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let y = parse_label(&r[t.label_col], opts.positive.as_deref())
            .map_err(|e| Error::Parse(format!("row {}: {e}", line + 2)))?;
        rows.push(LabeledExample { x: FeatureVector::new(values), y });
    }
    Dataset::new(schema.clone(), rows)
}
