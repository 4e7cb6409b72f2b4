//! Empirical distribution over distinct feature vectors, stored as exact
//! positive/negative counts.

use indexmap::IndexMap;
use num_integer::Integer;
use num_rational::Ratio;

use crate::error::{Error, Result};
use crate::features::{Dataset, FeatureVector};

/// Largest common denominator accepted by [`EmpiricalDistribution::from_weighted`].
pub const MAX_DENOMINATOR: i64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Mass {
    pub pos: u64,
    pub neg: u64,
}

impl Mass {
    pub fn total(&self) -> u64 {
        self.pos + self.neg
    }
}

/// `D+(x) = pos(x) / total`, `D-(x) = neg(x) / total`. Entries keep first
/// appearance order, which fixes the node order of the flow network.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalDistribution {
    entries: IndexMap<FeatureVector, Mass>,
    total: u64,
}

impl EmpiricalDistribution {
    pub fn from_dataset(data: &Dataset) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::Empty("cannot build a distribution from an empty dataset".into()));
        }
        let mut entries: IndexMap<FeatureVector, Mass> = IndexMap::new();
        for row in data.rows() {
            let m = entries.entry(row.x.clone()).or_default();
            if row.y == 1 {
                m.pos += 1;
            } else {
                m.neg += 1;
            }
        }
        Ok(Self { entries, total: data.len() as u64 })
    }

    /// Builds from rational `(x, positive weight, negative weight)` triples by
    /// scaling every weight with the least common denominator.
    pub fn from_weighted(entries: &[(FeatureVector, Ratio<i64>, Ratio<i64>)]) -> Result<Self> {
        let mut lcd: i64 = 1;
        for (_, p, n) in entries {
            for w in [p, n] {
                if *w < Ratio::from_integer(0) {
                    return Err(Error::InvalidWeight(format!("negative weight {w}")));
                }
                lcd = lcd.lcm(w.denom());
                if lcd > MAX_DENOMINATOR {
                    return Err(Error::InvalidWeight(format!(
                        "common denominator exceeds {MAX_DENOMINATOR}"
                    )));
                }
            }
        }
        let scale = |w: &Ratio<i64>| -> u64 {
            let scaled = *w * Ratio::from_integer(lcd);
            debug_assert!(scaled.is_integer());
            scaled.to_integer() as u64
        };
        let mut map: IndexMap<FeatureVector, Mass> = IndexMap::new();
        let mut total = 0u64;
        for (x, p, n) in entries {
            let (pos, neg) = (scale(p), scale(n));
            let m = map.entry(x.clone()).or_default();
            m.pos += pos;
            m.neg += neg;
            total += pos + neg;
        }
        if total == 0 {
            return Err(Error::Empty("distribution has zero total mass".into()));
        }
        Ok(Self { entries: map, total })
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn mass(&self, x: &FeatureVector) -> Mass {
        self.entries.get(x).copied().unwrap_or_default()
    }

    pub fn d_plus(&self, x: &FeatureVector) -> f64 {
        self.mass(x).pos as f64 / self.total as f64
    }

    pub fn d_minus(&self, x: &FeatureVector) -> f64 {
        self.mass(x).neg as f64 / self.total as f64
    }

    pub fn iter(&self) -> impl Iterator<Item = (&FeatureVector, &Mass)> {
        self.entries.iter()
    }

    pub fn vectors(&self) -> impl Iterator<Item = &FeatureVector> {
        self.entries.keys()
    }

    pub fn index_of(&self, x: &FeatureVector) -> Option<usize> {
        self.entries.get_index_of(x)
    }

    pub fn get_index(&self, i: usize) -> Option<(&FeatureVector, &Mass)> {
        self.entries.get_index(i)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{FeatureSchema, FeatureValue, LabeledExample};

    fn v(x: f64) -> FeatureVector {
        FeatureVector::new(vec![FeatureValue::Numeric(x)])
    }

    #[test]
    fn counts_duplicates() {
        let schema = FeatureSchema::numeric(1).unwrap();
        let rows = [1u8, 0, 1].iter().map(|&y| LabeledExample { x: v(1.0), y }).collect();
        let d = EmpiricalDistribution::from_dataset(&Dataset::new(schema, rows).unwrap()).unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d.mass(&v(1.0)), Mass { pos: 2, neg: 1 });
        assert_eq!(d.total(), 3);
        assert!((d.d_plus(&v(1.0)) - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn distinct_rows_unit_mass() {
        let schema = FeatureSchema::numeric(1).unwrap();
        let rows = (0..5).map(|i| LabeledExample { x: v(i as f64), y: (i % 2) as u8 }).collect();
        let d = EmpiricalDistribution::from_dataset(&Dataset::new(schema, rows).unwrap()).unwrap();
        assert!(d.iter().all(|(_, m)| m.total() == 1));
    }

    #[test]
    fn empty_dataset_rejected() {
        let schema = FeatureSchema::numeric(1).unwrap();
        let empty = Dataset::new(schema, vec![]).unwrap();
        assert!(matches!(EmpiricalDistribution::from_dataset(&empty), Err(Error::Empty(_))));
    }

    #[test]
    fn weighted_lcd_scaling() {
        let d = EmpiricalDistribution::from_weighted(&[(
            v(0.0),
            Ratio::new(1, 3),
            Ratio::new(2, 3),
        )])
        .unwrap();
        assert_eq!(d.mass(&v(0.0)), Mass { pos: 1, neg: 2 });
        assert_eq!(d.total(), 3);

        let single =
            EmpiricalDistribution::from_weighted(&[(v(0.0), Ratio::from(1), Ratio::from(0))])
                .unwrap();
        assert_eq!(single.total(), 1);
    }

    #[test]
    fn weighted_rejects_negative_and_huge_denominators() {
        assert!(matches!(
            EmpiricalDistribution::from_weighted(&[(v(0.0), Ratio::new(-1, 2), Ratio::from(1))]),
            Err(Error::InvalidWeight(_))
        ));
        assert!(EmpiricalDistribution::from_weighted(&[
            (v(0.0), Ratio::new(1, 999_983), Ratio::from(0)),
            (v(1.0), Ratio::new(1, 999_979), Ratio::from(0)),
        ])
        .is_err());
    }
}
