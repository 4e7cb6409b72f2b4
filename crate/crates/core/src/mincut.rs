//! The optimal truthful classifier on a finite support, via minimum s-t cut.
//!
//! Node per distinct training vector. `s -> x` carries the negative mass of
//! `x`, `x -> t` the positive mass, and `x -> x'` is uncuttable whenever `x`
//! can report `x'`. Vectors left on the sink side are accepted; the
//! uncuttable arcs force every vector that can reach an accepted one to be
//! accepted as well, which is exactly truthfulness.

use std::collections::HashSet;
use std::fmt;

use crate::empirical::EmpiricalDistribution;
use crate::error::{Error, Result};
use crate::features::{can_report_unchecked, lattice, Dataset, FeatureVector, DEFAULT_ENUMERATION_LIMIT};
use crate::flow::Dinic;
use crate::strategic::Classifier;

pub const SOURCE: usize = 0;
pub const SINK: usize = 1;

/// Exhaustive search handles at most this many distinct vectors.
pub const BRUTE_FORCE_MAX: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Capacity {
    Finite(u64),
    Infinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Arc {
    pub from: usize,
    pub to: usize,
    pub capacity: Capacity,
}

/// Node `0` is the source, `1` the sink, and `2 + j` the `j`-th vector.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowNetwork {
    vectors: Vec<FeatureVector>,
    arcs: Vec<Arc>,
}

impl FlowNetwork {
    pub fn node_count(&self) -> usize {
        self.vectors.len() + 2
    }

    pub fn vectors(&self) -> &[FeatureVector] {
        &self.vectors
    }

    pub fn arcs(&self) -> &[Arc] {
        &self.arcs
    }

    pub fn node_of(&self, j: usize) -> usize {
        j + 2
    }

    pub fn finite_arc_count(&self) -> usize {
        self.arcs.iter().filter(|a| a.capacity != Capacity::Infinite).count()
    }

    pub fn infinite_arc_count(&self) -> usize {
        self.arcs.len() - self.finite_arc_count()
    }

    /// Sum of finite capacities crossing from `s_side` to the rest, or
    /// `None` when an infinite arc crosses.
    pub fn cut_capacity(&self, s_side: &[bool]) -> Option<u64> {
        let mut total = 0u64;
        for a in &self.arcs {
            if s_side[a.from] && !s_side[a.to] {
                match a.capacity {
                    Capacity::Finite(c) => total += c,
                    Capacity::Infinite => return None,
                }
            }
        }
        Some(total)
    }
}

pub fn build_graph(dist: &EmpiricalDistribution) -> FlowNetwork {
    let vectors: Vec<FeatureVector> = dist.vectors().cloned().collect();
    let mut arcs = Vec::new();
    for (j, (_, m)) in dist.iter().enumerate() {
        arcs.push(Arc { from: SOURCE, to: j + 2, capacity: Capacity::Finite(m.neg) });
        arcs.push(Arc { from: j + 2, to: SINK, capacity: Capacity::Finite(m.pos) });
    }
    for (i, x) in vectors.iter().enumerate() {
        for (j, y) in vectors.iter().enumerate() {
            if i != j && can_report_unchecked(x, y) {
                arcs.push(Arc { from: i + 2, to: j + 2, capacity: Capacity::Infinite });
            }
        }
    }
    FlowNetwork { vectors, arcs }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CutResult {
    pub flow_value: u64,
    /// Indexed by node; `true` for the source side.
    pub s_side: Vec<bool>,
}

impl CutResult {
    pub fn t_side(&self) -> Vec<usize> {
        (0..self.s_side.len()).filter(|&v| !self.s_side[v]).collect()
    }
}

/// Exact max flow; the returned cut is the one closest to the source.
pub fn max_flow_min_cut(net: &FlowNetwork) -> Result<CutResult> {
    let mut finite: u64 = 0;
    for a in &net.arcs {
        if let Capacity::Finite(c) = a.capacity {
            finite = finite.checked_add(c).ok_or(Error::CapacityOverflow)?;
        }
    }
    let infinite = finite.checked_add(1).ok_or(Error::CapacityOverflow)?;
    let mut d = Dinic::new(net.node_count());
    for a in &net.arcs {
        let c = match a.capacity {
            Capacity::Finite(c) => c,
            Capacity::Infinite => infinite,
        };
        d.add_edge(a.from, a.to, c);
    }
    let flow_value = d.max_flow(SOURCE, SINK)?;
    Ok(CutResult { flow_value, s_side: d.source_side(SOURCE) })
}

/// Loss as an exact fraction of the distribution's total mass.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExactLoss {
    pub numerator: u64,
    pub denominator: u64,
}

impl ExactLoss {
    pub fn value(&self) -> f64 {
        self.numerator as f64 / self.denominator as f64
    }
}

impl fmt::Display for ExactLoss {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.numerator, self.denominator)
    }
}

/// Accepts `x` iff `x` can report some accepted training vector. Vectors
/// that reach no accepted vector are rejected.
#[derive(Debug, Clone, PartialEq)]
pub struct MincutClassifier {
    accepted: Vec<FeatureVector>,
    accepted_set: HashSet<FeatureVector>,
    training: Vec<FeatureVector>,
}

impl MincutClassifier {
    pub fn from_accepted(accepted: Vec<FeatureVector>, training: Vec<FeatureVector>) -> Self {
        let accepted_set = accepted.iter().cloned().collect();
        Self { accepted, accepted_set, training }
    }

    pub fn accepted(&self) -> &[FeatureVector] {
        &self.accepted
    }

    pub fn training_vectors(&self) -> &[FeatureVector] {
        &self.training
    }

    pub fn accepts_exactly(&self, x: &FeatureVector) -> bool {
        self.accepted_set.contains(x)
    }

    /// Loss of this classifier on `dist`.
    pub fn loss_on(&self, dist: &EmpiricalDistribution) -> ExactLoss {
        let numerator = dist
            .iter()
            .map(|(x, m)| if self.predict(x) == 1 { m.neg } else { m.pos })
            .sum();
        ExactLoss { numerator, denominator: dist.total() }
    }
}

impl Classifier for MincutClassifier {
    fn predict(&self, x: &FeatureVector) -> u8 {
        if self.accepted_set.contains(x) {
            return 1;
        }
        let p = x.present_count();
        let by_lattice = p <= DEFAULT_ENUMERATION_LIMIT && (1usize << p) < self.accepted.len();
        let hit = if by_lattice {
            lattice(x, DEFAULT_ENUMERATION_LIMIT)
                .map(|mut l| l.any(|r| self.accepted_set.contains(&r)))
                .unwrap_or(false)
        } else {
            self.accepted.iter().any(|a| can_report_unchecked(x, a))
        };
        hit as u8
    }

    fn proba(&self, x: &FeatureVector) -> Option<f64> {
        Some(self.predict(x) as f64)
    }

    fn is_truthful(&self) -> bool {
        true
    }
}

pub fn train_mincut_distribution(dist: &EmpiricalDistribution) -> Result<MincutClassifier> {
    let net = build_graph(dist);
    let cut = max_flow_min_cut(&net)?;
    let accepted = (0..net.vectors.len())
        .filter(|&j| !cut.s_side[net.node_of(j)])
        .map(|j| net.vectors[j].clone())
        .collect();
    Ok(MincutClassifier::from_accepted(accepted, net.vectors))
}

pub fn train_mincut(train: &Dataset) -> Result<MincutClassifier> {
    train_mincut_distribution(&EmpiricalDistribution::from_dataset(train)?)
}

/// Scans every accept-set closed under "can report an accepted vector" and
/// returns the least loss with the first set attaining it.
pub fn brute_force_optimal(dist: &EmpiricalDistribution) -> Result<(ExactLoss, Vec<FeatureVector>)> {
    let n = dist.len();
    if n > BRUTE_FORCE_MAX {
        return Err(Error::TooManyVectors { got: n, max: BRUTE_FORCE_MAX });
    }
    let entries: Vec<_> = dist.iter().collect();
    // reporters[j]: vectors that can report vector j.
    let reporters: Vec<u32> = (0..n)
        .map(|j| {
            (0..n)
                .filter(|&i| i != j && can_report_unchecked(entries[i].0, entries[j].0))
                .fold(0u32, |m, i| m | 1 << i)
        })
        .collect();
    let mut best: Option<(u64, u32)> = None;
    for mask in 0u32..(1u32 << n) {
        let closed = (0..n).all(|j| mask >> j & 1 == 0 || reporters[j] & !mask == 0);
        if !closed {
            continue;
        }
        let loss: u64 = entries
            .iter()
            .enumerate()
            .map(|(j, (_, m))| if mask >> j & 1 == 1 { m.neg } else { m.pos })
            .sum();
        if best.is_none_or(|(b, _)| loss < b) {
            best = Some((loss, mask));
        }
    }
    let (numerator, mask) = best.expect("the empty set is always closed");
    let set = (0..n).filter(|&j| mask >> j & 1 == 1).map(|j| entries[j].0.clone()).collect();
    Ok((ExactLoss { numerator, denominator: dist.total() }, set))
}
