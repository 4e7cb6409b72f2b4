//! Strategic agents: best responses, strategic loss, the direct-revelation
//! transform, and truthfulness auditing.
//!
//! An agent holding `x` may report any projection of `x` and always picks a
//! report that maximizes the classifier's output. A classifier is truthful
//! when `f(x) >= f(x|_S)` for every `x` and `S`; for such classifiers the
//! truthful report is already a best response.

use std::collections::HashSet;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::features::{lattice, Dataset, FeatureValue, FeatureVector, DEFAULT_ENUMERATION_LIMIT};
use crate::linear::LinearModel;

/// A binary classifier over raw feature vectors. Inputs must have the arity
/// of the schema the classifier was trained on.
pub trait Classifier: Send + Sync {
    fn predict(&self, x: &FeatureVector) -> u8;

    /// Probabilistic score in `[0, 1]` when the model has one.
    fn proba(&self, _x: &FeatureVector) -> Option<f64> {
        None
    }

    /// True only when the classifier is monotone under projection by
    /// construction. Lets [`best_response`] skip enumeration.
    fn is_truthful(&self) -> bool {
        false
    }

    /// A closed-form best response, for models that have one.
    fn best_response_hint(&self, _x: &FeatureVector) -> Option<FeatureVector> {
        None
    }
}

impl<C: Classifier + ?Sized> Classifier for &C {
    fn predict(&self, x: &FeatureVector) -> u8 {
        (**self).predict(x)
    }
    fn proba(&self, x: &FeatureVector) -> Option<f64> {
        (**self).proba(x)
    }
    fn is_truthful(&self) -> bool {
        (**self).is_truthful()
    }
    fn best_response_hint(&self, x: &FeatureVector) -> Option<FeatureVector> {
        (**self).best_response_hint(x)
    }
}

impl<C: Classifier + ?Sized> Classifier for Box<C> {
    fn predict(&self, x: &FeatureVector) -> u8 {
        (**self).predict(x)
    }
    fn proba(&self, x: &FeatureVector) -> Option<f64> {
        (**self).proba(x)
    }
    fn is_truthful(&self) -> bool {
        (**self).is_truthful()
    }
    fn best_response_hint(&self, x: &FeatureVector) -> Option<FeatureVector> {
        (**self).best_response_hint(x)
    }
}

/// Accepts exactly the listed vectors. Not truthful in general.
#[derive(Debug, Clone, Default)]
pub struct AcceptSet {
    accepted: HashSet<FeatureVector>,
}

impl AcceptSet {
    pub fn new<I: IntoIterator<Item = FeatureVector>>(accepted: I) -> Self {
        Self { accepted: accepted.into_iter().collect() }
    }
}

impl Classifier for AcceptSet {
    fn predict(&self, x: &FeatureVector) -> u8 {
        self.accepted.contains(x) as u8
    }
}

/// Always outputs the same label.
#[derive(Debug, Clone, Copy)]
pub struct Constant(pub u8);

impl Classifier for Constant {
    fn predict(&self, _x: &FeatureVector) -> u8 {
        self.0
    }
    fn proba(&self, _x: &FeatureVector) -> Option<f64> {
        Some(self.0 as f64)
    }
    fn is_truthful(&self) -> bool {
        true
    }
}

/// The report an agent with `x` submits and the label it obtains.
///
/// Ties go to the first maximizer in lattice order, which starts at `x`.
pub fn best_response<C: Classifier + ?Sized>(
    f: &C,
    x: &FeatureVector,
    limit: usize,
) -> Result<(FeatureVector, u8)> {
    if f.is_truthful() {
        return Ok((x.clone(), f.predict(x)));
    }
    if let Some(report) = f.best_response_hint(x) {
        let outcome = f.predict(&report);
        return Ok((report, outcome));
    }
    brute_force_best_response(f, x, limit)
}

/// Exhaustive best response over the full projection lattice, ignoring
/// any truthfulness flag or hint.
pub fn brute_force_best_response<C: Classifier + ?Sized>(
    f: &C,
    x: &FeatureVector,
    limit: usize,
) -> Result<(FeatureVector, u8)> {
    let mut lat = lattice(x, limit)?;
    let first = lat.next().expect("lattice always contains x");
    let mut best = (first.clone(), f.predict(&first));
    if best.1 == 1 {
        return Ok(best);
    }
    for report in lat {
        if f.predict(&report) == 1 {
            best = (report, 1);
            break;
        }
    }
    Ok(best)
}

/// Score-maximizing report against a linear model that imputes missing
/// features. The imputed score is separable across raw attributes, so each
/// attribute is withheld independently iff its imputed contribution beats
/// its true one.
pub fn best_response_imputed_linear(
    model: &LinearModel,
    impute_values: &FeatureVector,
    x: &FeatureVector,
) -> FeatureVector {
    let values = x
        .values()
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            if v.is_missing() {
                return v;
            }
            let truthful = model.feature_contribution(i, v);
            let imputed = model.feature_contribution(i, impute_values.get(i));
            if truthful < imputed {
                FeatureValue::Missing
            } else {
                v
            }
        })
        .collect();
    FeatureVector::new(values)
}

/// Exact fraction of correctly handled rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Accuracy {
    pub correct: usize,
    pub total: usize,
}

impl Accuracy {
    pub fn value(&self) -> f64 {
        if self.total == 0 {
            return f64::NAN;
        }
        self.correct as f64 / self.total as f64
    }
}

impl fmt::Display for Accuracy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.correct, self.total)
    }
}

/// Accuracy when every agent reports truthfully.
pub fn truthful_accuracy<C: Classifier + ?Sized>(f: &C, test: &Dataset) -> Accuracy {
    let correct = test.rows().iter().filter(|r| f.predict(&r.x) == r.y).count();
    Accuracy { correct, total: test.len() }
}

/// Accuracy when every agent best-responds (one minus the strategic loss).
pub fn strategic_accuracy<C: Classifier + ?Sized>(
    f: &C,
    test: &Dataset,
    limit: usize,
) -> Result<Accuracy> {
    let mut correct = 0;
    for r in test.rows() {
        let (_, outcome) = best_response(f, &r.x, limit)?;
        correct += (outcome == r.y) as usize;
    }
    Ok(Accuracy { correct, total: test.len() })
}

/// `f'(x) = max over reports of f`: truthful, and agrees with `f`'s
/// post-manipulation outcome everywhere.
#[derive(Debug, Clone)]
pub struct DirectRevelation<C> {
    inner: C,
    limit: usize,
}

pub fn direct_revelation<C: Classifier>(f: C) -> DirectRevelation<C> {
    DirectRevelation { inner: f, limit: DEFAULT_ENUMERATION_LIMIT }
}

impl<C: Classifier> DirectRevelation<C> {
    pub fn with_limit(inner: C, limit: usize) -> Self {
        Self { inner, limit }
    }

    pub fn inner(&self) -> &C {
        &self.inner
    }

    pub fn try_predict(&self, x: &FeatureVector) -> Result<u8> {
        brute_force_best_response(&self.inner, x, self.limit).map(|(_, o)| o)
    }
}

impl<C: Classifier> Classifier for DirectRevelation<C> {
    /// Panics if `x` has more present features than the enumeration limit;
    /// use [`DirectRevelation::try_predict`] to handle that case.
    fn predict(&self, x: &FeatureVector) -> u8 {
        self.try_predict(x).expect("direct revelation lattice exceeds limit")
    }

    fn is_truthful(&self) -> bool {
        true
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub row: usize,
    /// The higher-scored projection.
    pub report: FeatureVector,
    /// The vector it was projected from.
    pub source: FeatureVector,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AuditReport {
    pub rows_checked: usize,
    pub comparisons: usize,
    pub violations: Vec<Violation>,
}

impl AuditReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Randomized audit: for each row, draws `trials_per_row` subsets (each
/// present feature kept with probability 1/2) and flags any projection that
/// scores above the full vector.
pub fn audit_truthfulness<C: Classifier + ?Sized>(
    f: &C,
    samples: &Dataset,
    trials_per_row: usize,
    seed: u64,
) -> AuditReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = AuditReport::default();
    for (row, r) in samples.rows().iter().enumerate() {
        let full = f.predict(&r.x);
        report.rows_checked += 1;
        for _ in 0..trials_per_row {
            let values = r
                .x
                .values()
                .iter()
                .map(|&v| if v.is_present() && rng.gen_bool(0.5) { v } else { FeatureValue::Missing })
                .collect();
            let projected = FeatureVector::new(values);
            report.comparisons += 1;
            if f.predict(&projected) > full {
                report.violations.push(Violation { row, report: projected, source: r.x.clone() });
            }
        }
    }
    report
}

/// Exhaustive audit over every projection lattice: checks each lattice
/// node against all of its one-feature-dropped children, which by
/// transitivity covers every reporting pair below the row.
pub fn audit_truthfulness_exhaustive<C: Classifier + ?Sized>(
    f: &C,
    samples: &Dataset,
    limit: usize,
) -> Result<AuditReport> {
    let mut report = AuditReport::default();
    for (row, r) in samples.rows().iter().enumerate() {
        let nodes: Vec<FeatureVector> = lattice(&r.x, limit)?.collect();
        let outcomes: Vec<u8> = nodes.iter().map(|n| f.predict(n)).collect();
        let p = r.x.present_count();
        report.rows_checked += 1;
        for (mask, node) in nodes.iter().enumerate() {
            for bit in 0..p {
                if mask >> bit & 1 == 1 {
                    continue;
                }
                let child = mask | (1 << bit);
                report.comparisons += 1;
                if outcomes[child] > outcomes[mask] {
                    report.violations.push(Violation {
                        row,
                        report: nodes[child].clone(),
                        source: node.clone(),
                    });
                }
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{FeatureKind, FeatureSchema, LabeledExample};

    const H: u32 = 0;
    const L: u32 = 1;

    fn v(a: Option<u32>, b: Option<u32>) -> FeatureVector {
        let c = |o: Option<u32>| o.map_or(FeatureValue::Missing, FeatureValue::Categorical);
        FeatureVector::new(vec![c(a), c(b)])
    }

    fn schema() -> FeatureSchema {
        let lv = || FeatureKind::Categorical { levels: vec!["h".into(), "l".into()] };
        FeatureSchema::new(vec![("sat".into(), lv()), ("act".into(), lv())]).unwrap()
    }

    fn ideal_rule() -> AcceptSet {
        AcceptSet::new([
            v(Some(H), Some(H)),
            v(Some(H), Some(L)),
            v(Some(H), None),
            v(None, Some(H)),
        ])
    }

    #[test]
    fn unconstrained_rule_is_gamed() {
        let (report, outcome) = best_response(&ideal_rule(), &v(Some(L), Some(H)), 20).unwrap();
        assert_eq!(report, v(None, Some(H)));
        assert_eq!(outcome, 1);
    }

    #[test]
    fn truthful_classifier_reports_truthfully() {
        let x = v(Some(L), Some(L));
        let (report, outcome) = best_response(&Constant(1), &x, 20).unwrap();
        assert_eq!(report, x);
        assert_eq!(outcome, 1);
    }

    #[test]
    fn best_response_never_worse_than_truth() {
        let f = ideal_rule();
        for a in [None, Some(H), Some(L)] {
            for b in [None, Some(H), Some(L)] {
                let x = v(a, b);
                let (_, o) = best_response(&f, &x, 20).unwrap();
                assert!(o >= f.predict(&x));
            }
        }
    }

    fn all_vectors() -> Dataset {
        let mut rows = Vec::new();
        for a in [None, Some(H), Some(L)] {
            for b in [None, Some(H), Some(L)] {
                rows.push(LabeledExample { x: v(a, b), y: 1 });
            }
        }
        Dataset::new(schema(), rows).unwrap()
    }

    #[test]
    fn direct_revelation_is_truthful_and_idempotent() {
        let f = ideal_rule();
        let data = all_vectors();
        let g = direct_revelation(&f);
        assert!(audit_truthfulness_exhaustive(&g, &data, 20).unwrap().is_clean());
        for r in data.rows() {
            let (_, o) = best_response(&f, &r.x, 20).unwrap();
            assert_eq!(g.predict(&r.x), o);
        }
        let gg = direct_revelation(&g);
        for r in data.rows() {
            assert_eq!(gg.predict(&r.x), g.predict(&r.x));
        }
        assert!(!audit_truthfulness_exhaustive(&f, &data, 20).unwrap().is_clean());
    }

    #[test]
    fn chain_gets_lifted() {
        let x = v(Some(H), Some(H));
        let x2 = v(Some(H), None);
        let f = AcceptSet::new([x2.clone()]);
        let g = direct_revelation(&f);
        assert_eq!(f.predict(&x), 0);
        assert_eq!(g.predict(&x), 1);
    }

    #[test]
    fn constant_classifiers_never_violate() {
        let data = all_vectors();
        for c in [Constant(0), Constant(1)] {
            assert!(audit_truthfulness(&c, &data, 16, 7).is_clean());
        }
    }

    #[test]
    fn always_accept_strategic_accuracy_is_base_rate() {
        let mut rows = all_vectors().rows().to_vec();
        for (i, r) in rows.iter_mut().enumerate() {
            r.y = (i % 3 == 0) as u8;
        }
        let data = Dataset::new(schema(), rows).unwrap();
        let acc = strategic_accuracy(&Constant(1), &data, 20).unwrap();
        assert_eq!(acc, Accuracy { correct: 3, total: 9 });
        assert_eq!(acc, truthful_accuracy(&Constant(1), &data));
    }
}
