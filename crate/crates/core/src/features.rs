//! Feature vectors with missing values and the reporting lattice.
//!
//! A vector `x` can be reported as any projection `x|_S`: the values on `S`
//! are kept and every other slot becomes [`FeatureValue::Missing`]. The
//! relation "x can report x2" is a partial order, which is what makes the
//! direct-revelation construction and the truthful classifiers work.

use std::fmt;
use std::hash::{Hash, Hasher};

use crate::error::{Error, Result};

/// Maximum number of present features for which [`reachable_set`] will
/// enumerate the full projection lattice.
pub const DEFAULT_ENUMERATION_LIMIT: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub enum FeatureKind {
    Numeric,
    /// Categorical with interned level names; symbol id `i` names `levels[i]`.
    Categorical { levels: Vec<String> },
}

impl FeatureKind {
    pub fn is_numeric(&self) -> bool {
        matches!(self, FeatureKind::Numeric)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSpec {
    pub name: String,
    pub kind: FeatureKind,
    /// Index of the underlying raw attribute this column encodes. Derived
    /// columns (inverted copies, bins) share the origin of their source and
    /// are withheld together with it.
    pub origin: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSchema {
    features: Vec<FeatureSpec>,
}

impl FeatureSchema {
    /// Builds a schema of raw attributes (each column is its own origin).
    pub fn new(features: Vec<(String, FeatureKind)>) -> Result<Self> {
        let specs = features
            .into_iter()
            .enumerate()
            .map(|(i, (name, kind))| FeatureSpec { name, kind, origin: i })
            .collect();
        Self::from_specs(specs)
    }

    pub fn from_specs(features: Vec<FeatureSpec>) -> Result<Self> {
        if features.is_empty() {
            return Err(Error::Schema("schema needs at least one feature".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for f in &features {
            if !seen.insert(f.name.as_str()) {
                return Err(Error::Schema(format!("duplicate feature name '{}'", f.name)));
            }
        }
        Ok(Self { features })
    }

    /// `k` numeric features named `x0..x{k-1}`.
    pub fn numeric(k: usize) -> Result<Self> {
        Self::new((0..k).map(|i| (format!("x{i}"), FeatureKind::Numeric)).collect())
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn features(&self) -> &[FeatureSpec] {
        &self.features
    }

    pub fn feature(&self, i: usize) -> &FeatureSpec {
        &self.features[i]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }

    /// Renders a vector using level names for categoricals and `*` for missing.
    pub fn format_vector(&self, x: &FeatureVector) -> String {
        let parts: Vec<String> = x
            .values()
            .iter()
            .zip(&self.features)
            .map(|(v, spec)| match (v, &spec.kind) {
                (FeatureValue::Missing, _) => "*".to_string(),
                (FeatureValue::Categorical(id), FeatureKind::Categorical { levels }) => levels
                    .get(*id as usize)
                    .cloned()
                    .unwrap_or_else(|| format!("#{id}")),
                (v, _) => v.to_string(),
            })
            .collect();
        format!("({})", parts.join(","))
    }
}

/// A single cell. Numeric values are always finite.
#[derive(Debug, Clone, Copy)]
pub enum FeatureValue {
    Missing,
    Numeric(f64),
    Categorical(u32),
}

impl FeatureValue {
    pub fn numeric(v: f64) -> Result<Self> {
        if v.is_finite() {
            Ok(FeatureValue::Numeric(if v == 0.0 { 0.0 } else { v }))
        } else {
            Err(Error::Type(format!("non-finite numeric value {v}")))
        }
    }

    pub fn is_missing(&self) -> bool {
        matches!(self, FeatureValue::Missing)
    }

    pub fn is_present(&self) -> bool {
        !self.is_missing()
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            FeatureValue::Numeric(v) => Some(*v),
            _ => None,
        }
    }

    // -0.0 and 0.0 compare equal, so hash them identically.
    fn numeric_bits(v: f64) -> u64 {
        if v == 0.0 {
            0
        } else {
            v.to_bits()
        }
    }
}

impl PartialEq for FeatureValue {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (FeatureValue::Missing, FeatureValue::Missing) => true,
            (FeatureValue::Numeric(a), FeatureValue::Numeric(b)) => {
                Self::numeric_bits(*a) == Self::numeric_bits(*b)
            }
            (FeatureValue::Categorical(a), FeatureValue::Categorical(b)) => a == b,
            _ => false,
        }
    }
}

impl Eq for FeatureValue {}

impl Hash for FeatureValue {
    fn hash<H: Hasher>(&self, state: &mut H) {
        match self {
            FeatureValue::Missing => state.write_u8(0),
            FeatureValue::Numeric(v) => {
                state.write_u8(1);
                state.write_u64(Self::numeric_bits(*v));
            }
            FeatureValue::Categorical(c) => {
                state.write_u8(2);
                state.write_u32(*c);
            }
        }
    }
}

impl fmt::Display for FeatureValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FeatureValue::Missing => write!(f, "*"),
            FeatureValue::Numeric(v) => write!(f, "{v}"),
            FeatureValue::Categorical(c) => write!(f, "#{c}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FeatureVector {
    values: Vec<FeatureValue>,
}

impl FeatureVector {
    pub fn new(values: Vec<FeatureValue>) -> Self {
        Self { values }
    }

    pub fn missing(k: usize) -> Self {
        Self { values: vec![FeatureValue::Missing; k] }
    }

    /// Convenience constructor: `None` is missing.
    pub fn from_options(values: &[Option<f64>]) -> Result<Self> {
        values
            .iter()
            .map(|v| match v {
                Some(x) => FeatureValue::numeric(*x),
                None => Ok(FeatureValue::Missing),
            })
            .collect::<Result<Vec<_>>>()
            .map(Self::new)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[FeatureValue] {
        &self.values
    }

    pub fn get(&self, i: usize) -> FeatureValue {
        self.values[i]
    }

    pub fn into_values(self) -> Vec<FeatureValue> {
        self.values
    }

    pub fn present_indices(&self) -> Vec<usize> {
        self.values
            .iter()
            .enumerate()
            .filter(|(_, v)| v.is_present())
            .map(|(i, _)| i)
            .collect()
    }

    pub fn present_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_present()).count()
    }

    /// True when every feature of `subset` is present.
    pub fn has_all(&self, subset: &FeatureSubset) -> bool {
        subset.iter().all(|i| self.values[i].is_present())
    }

    /// The set of present features.
    pub fn pattern(&self) -> FeatureSubset {
        FeatureSubset { members: self.present_indices() }
    }
}

impl fmt::Display for FeatureVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, v) in self.values.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, ")")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LabeledExample {
    pub x: FeatureVector,
    pub y: u8,
}

// FeatureVector has no total order; compare by display form for sorting only.
impl PartialOrd for FeatureVector {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for FeatureVector {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        fn key(v: &FeatureValue) -> (u8, u64) {
            match v {
                FeatureValue::Missing => (0, 0),
                FeatureValue::Numeric(x) => (1, FeatureValue::numeric_bits(*x)),
                FeatureValue::Categorical(c) => (2, *c as u64),
            }
        }
        self.values
            .iter()
            .map(key)
            .cmp(other.values.iter().map(key))
    }
}

impl LabeledExample {
    pub fn new(x: FeatureVector, y: u8) -> Result<Self> {
        if y > 1 {
            return Err(Error::Type(format!("label must be 0 or 1, got {y}")));
        }
        Ok(Self { x, y })
    }
}

/// A sorted, duplicate-free set of feature indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct FeatureSubset {
    members: Vec<usize>,
}

impl FeatureSubset {
    /// Validates every index against arity `k`.
    pub fn new<I: IntoIterator<Item = usize>>(members: I, k: usize) -> Result<Self> {
        let mut members: Vec<usize> = members.into_iter().collect();
        if let Some(&bad) = members.iter().find(|&&i| i >= k) {
            return Err(Error::IndexOutOfRange { index: bad, arity: k });
        }
        members.sort_unstable();
        members.dedup();
        Ok(Self { members })
    }

    pub fn full(k: usize) -> Self {
        Self { members: (0..k).collect() }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.members.binary_search(&i).is_ok()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.members.iter().copied()
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn is_subset_of(&self, other: &FeatureSubset) -> bool {
        self.iter().all(|i| other.contains(i))
    }

    /// Maps a subset of raw attributes onto the columns of a derived schema
    /// whose origin lies in the subset.
    pub fn image_in(&self, schema: &FeatureSchema) -> FeatureSubset {
        FeatureSubset {
            members: schema
                .features()
                .iter()
                .enumerate()
                .filter(|(_, f)| self.contains(f.origin))
                .map(|(i, _)| i)
                .collect(),
        }
    }
}

impl fmt::Display for FeatureSubset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.members.iter().map(|i| i.to_string()).collect();
        write!(f, "{{{}}}", parts.join(","))
    }
}

/// `x|_S`: keeps the values on `subset`, blanks the rest.
pub fn project(x: &FeatureVector, subset: &FeatureSubset) -> Result<FeatureVector> {
    let k = x.len();
    if let Some(bad) = subset.iter().find(|&i| i >= k) {
        return Err(Error::IndexOutOfRange { index: bad, arity: k });
    }
    Ok(project_unchecked(x, subset))
}

pub(crate) fn project_unchecked(x: &FeatureVector, subset: &FeatureSubset) -> FeatureVector {
    let mut values = vec![FeatureValue::Missing; x.len()];
    for i in subset.iter() {
        values[i] = x.values[i];
    }
    FeatureVector { values }
}

/// Whether `x` can report `report`, i.e. `report` is a projection of `x`.
pub fn can_report(x: &FeatureVector, report: &FeatureVector) -> Result<bool> {
    if x.len() != report.len() {
        return Err(Error::ArityMismatch { expected: x.len(), got: report.len() });
    }
    Ok(can_report_unchecked(x, report))
}

pub(crate) fn can_report_unchecked(x: &FeatureVector, report: &FeatureVector) -> bool {
    x.values
        .iter()
        .zip(&report.values)
        .all(|(a, b)| b.is_missing() || a == b)
}

/// Iterates the projection lattice of `x` in canonical order: the `m`-th
/// item drops the present features selected by the bits of `m`, so the
/// first item is `x` itself and the last is the all-missing vector.
pub struct Lattice<'a> {
    x: &'a FeatureVector,
    present: Vec<usize>,
    next: u64,
    end: u64,
}

impl Iterator for Lattice<'_> {
    type Item = FeatureVector;

    fn next(&mut self) -> Option<FeatureVector> {
        if self.next >= self.end {
            return None;
        }
        let dropped = self.next;
        self.next += 1;
        let mut values = self.x.values.clone();
        for (bit, &i) in self.present.iter().enumerate() {
            if dropped >> bit & 1 == 1 {
                values[i] = FeatureValue::Missing;
            }
        }
        Some(FeatureVector { values })
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = (self.end - self.next) as usize;
        (n, Some(n))
    }
}

pub fn lattice(x: &FeatureVector, limit: usize) -> Result<Lattice<'_>> {
    let present = x.present_indices();
    if present.len() > limit || present.len() >= 64 {
        return Err(Error::LatticeTooLarge { present: present.len(), limit });
    }
    let end = 1u64 << present.len();
    Ok(Lattice { x, present, next: 0, end })
}

/// Every vector `x` can report, `2^p` of them for `p` present features.
pub fn reachable_set(x: &FeatureVector, limit: usize) -> Result<Vec<FeatureVector>> {
    Ok(lattice(x, limit)?.collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    schema: FeatureSchema,
    rows: Vec<LabeledExample>,
}

impl Dataset {
    pub fn new(schema: FeatureSchema, rows: Vec<LabeledExample>) -> Result<Self> {
        for (r, row) in rows.iter().enumerate() {
            check_row(&schema, &row.x).map_err(|e| match e {
                Error::Schema(m) => Error::Schema(format!("row {r}: {m}")),
                other => other,
            })?;
            if row.y > 1 {
                return Err(Error::Type(format!("row {r}: label {} is not binary", row.y)));
            }
        }
        Ok(Self { schema, rows })
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn rows(&self) -> &[LabeledExample] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn arity(&self) -> usize {
        self.schema.len()
    }

    /// (negatives, positives)
    pub fn label_counts(&self) -> (usize, usize) {
        let pos = self.rows.iter().filter(|r| r.y == 1).count();
        (self.rows.len() - pos, pos)
    }

    pub fn with_rows(&self, rows: Vec<LabeledExample>) -> Dataset {
        Dataset { schema: self.schema.clone(), rows }
    }

    pub fn select_rows(&self, indices: &[usize]) -> Dataset {
        self.with_rows(indices.iter().map(|&i| self.rows[i].clone()).collect())
    }

    /// Keeps only the listed columns, in the listed order.
    pub fn select_features(&self, columns: &[usize]) -> Result<Dataset> {
        let k = self.arity();
        if let Some(&bad) = columns.iter().find(|&&i| i >= k) {
            return Err(Error::IndexOutOfRange { index: bad, arity: k });
        }
        let specs = columns
            .iter()
            .enumerate()
            .map(|(new, &old)| {
                let f = self.schema.feature(old);
                FeatureSpec { name: f.name.clone(), kind: f.kind.clone(), origin: new }
            })
            .collect();
        let schema = FeatureSchema::from_specs(specs)?;
        let rows = self
            .rows
            .iter()
            .map(|r| LabeledExample {
                x: FeatureVector::new(columns.iter().map(|&c| r.x.values[c]).collect()),
                y: r.y,
            })
            .collect();
        Ok(Dataset { schema, rows })
    }
}

pub(crate) fn check_row(schema: &FeatureSchema, x: &FeatureVector) -> Result<()> {
    if x.len() != schema.len() {
        return Err(Error::ArityMismatch { expected: schema.len(), got: x.len() });
    }
    for (i, (v, spec)) in x.values.iter().zip(schema.features()).enumerate() {
        match (v, &spec.kind) {
            (FeatureValue::Missing, _) => {}
            (FeatureValue::Numeric(n), FeatureKind::Numeric) => {
                if !n.is_finite() {
                    return Err(Error::Type(format!("feature {i}: non-finite value")));
                }
            }
            (FeatureValue::Categorical(c), FeatureKind::Categorical { levels }) => {
                if (*c as usize) >= levels.len() {
                    return Err(Error::Schema(format!(
                        "feature {i}: symbol {c} outside {} levels",
                        levels.len()
                    )));
                }
            }
            _ => {
                return Err(Error::Type(format!(
                    "feature {i} ('{}'): value kind does not match schema",
                    spec.name
                )))
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hl(a: Option<u32>, b: Option<u32>) -> FeatureVector {
        let v = |o: Option<u32>| o.map_or(FeatureValue::Missing, FeatureValue::Categorical);
        FeatureVector::new(vec![v(a), v(b)])
    }

    const H: Option<u32> = Some(0);
    const L: Option<u32> = Some(1);

    #[test]
    fn project_drops_outside_subset() {
        let x = hl(H, L);
        let s = FeatureSubset::new([0], 2).unwrap();
        assert_eq!(project(&x, &s).unwrap(), hl(H, None));
        assert_eq!(project(&x, &FeatureSubset::full(2)).unwrap(), x);
        let s1 = FeatureSubset::new([1], 2).unwrap();
        assert_eq!(project(&hl(H, None), &s1).unwrap(), hl(None, None));
    }

    #[test]
    fn project_rejects_bad_index() {
        let x = hl(H, L);
        let s = FeatureSubset { members: vec![5] };
        assert!(matches!(project(&x, &s), Err(Error::IndexOutOfRange { index: 5, arity: 2 })));
        assert!(FeatureSubset::new([2], 2).is_err());
    }

    #[test]
    fn reporting_relation() {
        assert!(can_report(&hl(H, L), &hl(H, None)).unwrap());
        assert!(!can_report(&hl(H, None), &hl(H, L)).unwrap());
        assert!(can_report(&hl(H, L), &hl(H, L)).unwrap());
        assert!(!can_report(&hl(H, L), &hl(L, None)).unwrap());
        let three = FeatureVector::missing(3);
        assert!(matches!(can_report(&hl(H, L), &three), Err(Error::ArityMismatch { .. })));
    }

    #[test]
    fn reachable_set_enumerates_lattice() {
        let set = reachable_set(&hl(H, L), DEFAULT_ENUMERATION_LIMIT).unwrap();
        assert_eq!(set.len(), 4);
        assert_eq!(set[0], hl(H, L));
        for expected in [hl(H, L), hl(H, None), hl(None, L), hl(None, None)] {
            assert!(set.contains(&expected));
        }
        assert_eq!(reachable_set(&hl(None, None), 20).unwrap(), vec![hl(None, None)]);
    }

    #[test]
    fn reachable_set_limit() {
        let x = FeatureVector::from_options(&[Some(1.0); 5]).unwrap();
        assert_eq!(reachable_set(&x, 5).unwrap().len(), 32);
        assert!(matches!(
            reachable_set(&x, 4),
            Err(Error::LatticeTooLarge { present: 5, limit: 4 })
        ));
    }

    #[test]
    fn numeric_zero_signs_compare_equal() {
        let a = FeatureVector::new(vec![FeatureValue::Numeric(0.0)]);
        let b = FeatureVector::new(vec![FeatureValue::Numeric(-0.0)]);
        assert_eq!(a, b);
        let mut set = std::collections::HashSet::new();
        set.insert(a);
        assert!(set.contains(&b));
        assert!(FeatureValue::numeric(f64::NAN).is_err());
    }

    #[test]
    fn dataset_validation() {
        let schema = FeatureSchema::numeric(2).unwrap();
        let bad = LabeledExample { x: FeatureVector::missing(3), y: 0 };
        assert!(Dataset::new(schema.clone(), vec![bad]).is_err());
        let cat = LabeledExample { x: hl(H, None), y: 1 };
        assert!(matches!(Dataset::new(schema, vec![cat]), Err(Error::Type(_))));
        assert!(FeatureSchema::new(vec![
            ("a".into(), FeatureKind::Numeric),
            ("a".into(), FeatureKind::Numeric)
        ])
        .is_err());
    }
}
