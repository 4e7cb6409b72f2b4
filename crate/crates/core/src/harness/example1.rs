//! A two-test admissions toy: scores are high or low, either may be
//! withheld, and each of the eight possible reports is equally likely.

use std::fmt::Write;

use crate::empirical::EmpiricalDistribution;
use crate::error::Result;
use crate::features::{Dataset, FeatureKind, FeatureSchema, FeatureValue, FeatureVector, LabeledExample};
use crate::mincut::{brute_force_optimal, build_graph, max_flow_min_cut, train_mincut_distribution, ExactLoss};
use crate::strategic::{best_response, strategic_accuracy, truthful_accuracy, Accuracy, AcceptSet, Classifier};

const HIGH: u32 = 0;
const LOW: u32 = 1;

/// Rows per report; positives per report over the same order as [`REPORTS`].
const ROWS_PER_REPORT: u64 = 10;
const REPORTS: [(Option<u32>, Option<u32>, u64); 8] = [
    (Some(HIGH), Some(HIGH), 9),
    (Some(HIGH), Some(LOW), 7),
    (Some(LOW), Some(HIGH), 3),
    (Some(LOW), Some(LOW), 1),
    (Some(HIGH), None, 6),
    (None, Some(HIGH), 6),
    (Some(LOW), None, 2),
    (None, Some(LOW), 2),
];

fn vector(a: Option<u32>, b: Option<u32>) -> FeatureVector {
    let c = |o: Option<u32>| o.map_or(FeatureValue::Missing, FeatureValue::Categorical);
    FeatureVector::new(vec![c(a), c(b)])
}

pub fn schema() -> FeatureSchema {
    let hl = || FeatureKind::Categorical { levels: vec!["h".into(), "l".into()] };
    FeatureSchema::new(vec![("sat".into(), hl()), ("act".into(), hl())]).expect("static schema")
}

/// 80 rows, ten per report.
pub fn dataset() -> Dataset {
    let mut rows = Vec::new();
    for &(a, b, pos) in &REPORTS {
        for i in 0..ROWS_PER_REPORT {
            rows.push(LabeledExample { x: vector(a, b), y: (i < pos) as u8 });
        }
    }
    Dataset::new(schema(), rows).expect("static rows")
}

pub fn distribution() -> EmpiricalDistribution {
    EmpiricalDistribution::from_dataset(&dataset()).expect("nonempty")
}

/// The rule that would be best if nobody could withhold a score.
pub fn unconstrained_rule() -> AcceptSet {
    AcceptSet::new([
        vector(Some(HIGH), Some(HIGH)),
        vector(Some(HIGH), Some(LOW)),
        vector(Some(HIGH), None),
        vector(None, Some(HIGH)),
    ])
}

#[derive(Debug, Clone)]
pub struct Example1Report {
    pub schema: FeatureSchema,
    pub nodes: usize,
    pub finite_arcs: usize,
    pub infinite_arcs: usize,
    pub flow_value: u64,
    pub accepted: Vec<FeatureVector>,
    pub loss: ExactLoss,
    pub oracle_loss: ExactLoss,
    pub oracle_accepted: Vec<FeatureVector>,
    pub truthful: Accuracy,
    pub strategic: Accuracy,
    /// Best response of a low/high applicant against the unconstrained rule.
    pub gamed: (FeatureVector, u8),
    /// Best response of the same applicant against the trained classifier.
    pub resisted: (FeatureVector, u8),
}

pub fn run() -> Result<Example1Report> {
    let dist = distribution();
    let net = build_graph(&dist);
    let cut = max_flow_min_cut(&net)?;
    let model = train_mincut_distribution(&dist)?;
    let (oracle_loss, oracle_accepted) = brute_force_optimal(&dist)?;
    let data = dataset();
    let applicant = vector(Some(LOW), Some(HIGH));
    Ok(Example1Report {
        schema: schema(),
        nodes: net.node_count(),
        finite_arcs: net.finite_arc_count(),
        infinite_arcs: net.infinite_arc_count(),
        flow_value: cut.flow_value,
        accepted: model.accepted().to_vec(),
        loss: model.loss_on(&dist),
        oracle_loss,
        oracle_accepted,
        truthful: truthful_accuracy(&model, &data),
        strategic: strategic_accuracy(&model, &data, 2)?,
        gamed: best_response(&unconstrained_rule(), &applicant, 2)?,
        resisted: (applicant.clone(), model.predict(&applicant)),
    })
}

impl Example1Report {
    pub fn accepted_text(&self) -> String {
        let parts: Vec<String> = self.accepted.iter().map(|x| self.schema.format_vector(x)).collect();
        format!("{{{}}}", parts.join(","))
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let fv = |x: &FeatureVector| self.schema.format_vector(x);
        let _ = writeln!(s, "graph: {} nodes, {} finite arcs, {} infinite arcs", self.nodes, self.finite_arcs, self.infinite_arcs);
        let _ = writeln!(s, "max flow: {}", self.flow_value);
        let _ = writeln!(s, "accept set: {}", self.accepted_text());
        let _ = writeln!(s, "loss: {} = {}", self.loss, self.loss.value());
        let _ = writeln!(s, "exhaustive optimum: {}", self.oracle_loss);
        let _ = writeln!(s, "truthful accuracy: {} strategic accuracy: {}", self.truthful, self.strategic);
        let _ = writeln!(
            s,
            "applicant {} vs unconstrained rule: reports {} -> {}",
            fv(&self.resisted.0),
            fv(&self.gamed.0),
            self.gamed.1
        );
        let _ = writeln!(s, "applicant {} vs mincut: {}", fv(&self.resisted.0), self.resisted.1);
        s
    }
}
