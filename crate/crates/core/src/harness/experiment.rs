//! N x 2 cross-validation over a set of classifiers, reporting truthful
//! and strategic accuracy.

use std::fmt::{self, Write};
use std::str::FromStr;

use rayon::prelude::*;

use crate::baselines::{train_imp_lr, train_maj, train_rf_lr};
use crate::ensemble::{hc_train, HcConfig, SubsetStrategy};
use crate::error::{Error, Result};
use crate::features::{Dataset, DEFAULT_ENUMERATION_LIMIT};
use crate::harness::metrics::{auc, mean_std};
use crate::harness::protocol::{balance_indices, derive_seed, mask_features, prepare_fold, stratified_halves, FoldOptions};
use crate::linear::{train_iclr, train_logistic, LearningRate, TrainConfig};
use crate::mincut::train_mincut;
use crate::strategic::{best_response, truthful_accuracy, Accuracy, Classifier};

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "STRATSHIELD_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ClassifierKind {
    Maj,
    ImpLr,
    RfLr,
    Lr,
    Mincut,
    Hc,
    Iclr,
}

impl ClassifierKind {
    pub const ALL: [ClassifierKind; 7] = [
        ClassifierKind::Maj,
        ClassifierKind::ImpLr,
        ClassifierKind::RfLr,
        ClassifierKind::Lr,
        ClassifierKind::Mincut,
        ClassifierKind::Hc,
        ClassifierKind::Iclr,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            ClassifierKind::Maj => "Maj",
            ClassifierKind::ImpLr => "Imp(LR)",
            ClassifierKind::RfLr => "R-F(LR)",
            ClassifierKind::Lr => "LR",
            ClassifierKind::Mincut => "Mincut",
            ClassifierKind::Hc => "HC(LR)",
            ClassifierKind::Iclr => "IC-LR",
        }
    }

    fn uses_gradient_descent(&self) -> bool {
        !matches!(self, ClassifierKind::Maj | ClassifierKind::Mincut)
    }
}

impl fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for ClassifierKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s.to_ascii_lowercase().chars().filter(|c| c.is_ascii_alphanumeric()).collect();
        Ok(match key.as_str() {
            "maj" => ClassifierKind::Maj,
            "imp" | "implr" => ClassifierKind::ImpLr,
            "rf" | "rflr" => ClassifierKind::RfLr,
            "lr" => ClassifierKind::Lr,
            "mincut" => ClassifierKind::Mincut,
            "hc" | "hclr" => ClassifierKind::Hc,
            "iclr" => ClassifierKind::Iclr,
            _ => return Err(Error::Config(format!("unknown classifier '{s}'"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub epsilon: f64,
    pub balance: bool,
    pub top4: bool,
    pub discretize: bool,
    pub classifiers: Vec<ClassifierKind>,
    pub repeats: usize,
    pub seed: u64,
    /// Pick the learning rate from {0.1, 0.01} by inner 5-fold CV.
    pub grid: bool,
    pub train: TrainConfig,
    /// HC sweep improvement threshold.
    pub hc_delta: f64,
    /// Give IC-LR an inverted copy of every numeric feature.
    pub iclr_invert: bool,
    /// Worker threads; falls back to [`THREADS_ENV`], then to all cores.
    pub threads: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.2,
            balance: true,
            top4: true,
            discretize: false,
            classifiers: vec![
                ClassifierKind::Maj,
                ClassifierKind::ImpLr,
                ClassifierKind::RfLr,
                ClassifierKind::Mincut,
                ClassifierKind::Hc,
                ClassifierKind::Iclr,
            ],
            repeats: 10,
            seed: 0,
            grid: false,
            train: TrainConfig::default(),
            hc_delta: 1e-4,
            iclr_invert: true,
            threads: None,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.epsilon) {
            return Err(Error::Config(format!("epsilon must be in [0, 1), got {}", self.epsilon)));
        }
        if self.repeats == 0 {
            return Err(Error::Config("repeats must be at least 1".into()));
        }
        if self.classifiers.is_empty() {
            return Err(Error::Config("no classifiers selected".into()));
        }
        self.train.validate()
    }

    /// Every subset when there are at most four attributes, otherwise a
    /// capped sample of singletons and pairs.
    pub fn hc_strategy(k: usize) -> SubsetStrategy {
        if k <= 4 {
            SubsetStrategy::AllSubsetsOfTopK(k)
        } else {
            SubsetStrategy::Sampled { singletons: k.min(30), pairs: (k * (k - 1) / 2).min(30) }
        }
    }
}

/// Trains one classifier on `train` with learning rate `eta`.
pub fn fit_classifier(
    kind: ClassifierKind,
    train: &Dataset,
    cfg: &ExperimentConfig,
    eta: f64,
    seed: u64,
) -> Result<Box<dyn Classifier>> {
    let mut tc = cfg.train.clone();
    tc.learning_rate = match tc.learning_rate {
        LearningRate::Constant(_) => LearningRate::Constant(eta),
        LearningRate::InverseSqrt(_) => LearningRate::InverseSqrt(eta),
    };
    Ok(match kind {
        ClassifierKind::Maj => Box::new(train_maj(train)),
        ClassifierKind::ImpLr => Box::new(train_imp_lr(train, &tc)?),
        ClassifierKind::RfLr => Box::new(train_rf_lr(train, &tc)?),
        ClassifierKind::Lr => Box::new(train_logistic(train, &tc)?),
        ClassifierKind::Mincut => Box::new(train_mincut(train)?),
        ClassifierKind::Hc => {
            let hc = HcConfig {
                strategy: ExperimentConfig::hc_strategy(train.arity()),
                delta: cfg.hc_delta,
                max_iterations: None,
                seed,
                train: tc,
            };
            Box::new(hc_train(train, &hc)?)
        }
        ClassifierKind::Iclr => {
            tc.encoder.invert_numeric = cfg.iclr_invert;
            Box::new(train_iclr(train, &tc)?)
        }
    })
}

const GRID: [f64; 2] = [0.1, 0.01];

/// Learning rate with the most correct predictions over an inner
/// stratified 5-fold split of `train`; earlier grid entries win ties.
fn choose_learning_rate(kind: ClassifierKind, train: &Dataset, cfg: &ExperimentConfig, seed: u64) -> Result<f64> {
    let default = cfg.train.learning_rate.base();
    if !cfg.grid || !kind.uses_gradient_descent() {
        return Ok(default);
    }
    let folds = inner_folds(train, 5, seed);
    let mut best = (0usize, GRID[0]);
    for (gi, &eta) in GRID.iter().enumerate() {
        let mut correct = 0;
        for f in 0..folds.len() {
            let test_idx = &folds[f];
            let train_idx: Vec<usize> = folds.iter().enumerate().filter(|&(g, _)| g != f).flat_map(|(_, v)| v.clone()).collect();
            let inner_train = train.select_rows(&train_idx);
            let (neg, pos) = inner_train.label_counts();
            if neg == 0 || pos == 0 || test_idx.is_empty() {
                continue;
            }
            let model = fit_classifier(kind, &inner_train, cfg, eta, seed)?;
            correct += truthful_accuracy(&model, &train.select_rows(test_idx)).correct;
        }
        if gi == 0 || correct > best.0 {
            best = (correct, eta);
        }
    }
    Ok(best.1)
}

fn inner_folds(data: &Dataset, k: usize, seed: u64) -> Vec<Vec<usize>> {
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut folds = vec![Vec::new(); k];
    let mut next = 0;
    for label in [0u8, 1] {
        let mut idx: Vec<usize> = (0..data.len()).filter(|&i| data.rows()[i].y == label).collect();
        idx.shuffle(&mut rng);
        for i in idx {
            folds[next % k].push(i);
            next += 1;
        }
    }
    folds
}

#[derive(Debug, Clone, PartialEq)]
pub enum FoldOutcome {
    Done { truthful: Accuracy, strategic: Accuracy, auc: Option<f64> },
    Skipped(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldResult {
    pub classifier: ClassifierKind,
    pub repeat: usize,
    pub fold: usize,
    pub outcome: FoldOutcome,
}

/// Scores `model` on `test` under truthful and best-response reporting.
/// The AUC uses the probabilities of the reports agents actually submit.
pub fn evaluate(model: &dyn Classifier, test: &Dataset) -> Result<(Accuracy, Accuracy, Option<f64>)> {
    let truthful = truthful_accuracy(model, test);
    let mut correct = 0;
    let mut scores = Vec::with_capacity(test.len());
    let mut has_proba = true;
    for r in test.rows() {
        let (report, outcome) = best_response(model, &r.x, DEFAULT_ENUMERATION_LIMIT)?;
        correct += (outcome == r.y) as usize;
        match model.proba(&report) {
            Some(p) => scores.push((p, r.y)),
            None => has_proba = false,
        }
    }
    let strategic = Accuracy { correct, total: test.len() };
    Ok((truthful, strategic, if has_proba { auc(&scores) } else { None }))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub classifier: ClassifierKind,
    pub folds: usize,
    pub skipped: usize,
    pub truthful_mean: f64,
    pub truthful_std: f64,
    pub strategic_mean: f64,
    pub strategic_std: f64,
    pub auc: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub rows: Vec<MetricRow>,
    pub folds: Vec<FoldResult>,
}

fn f6(v: f64) -> String {
    format!("{v:.6}")
}

impl ExperimentReport {
    pub fn row(&self, kind: ClassifierKind) -> Option<&MetricRow> {
        self.rows.iter().find(|r| r.classifier == kind)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "classifier",
            "folds",
            "skipped",
            "truthful_mean",
            "truthful_std",
            "strategic_mean",
            "strategic_std",
            "auc_mean",
            "auc_std",
        ])?;
        for r in &self.rows {
            let (am, asd) = r.auc.map_or((String::new(), String::new()), |(m, s)| (f6(m), f6(s)));
            w.write_record([
                r.classifier.label().to_string(),
                r.folds.to_string(),
                r.skipped.to_string(),
                f6(r.truthful_mean),
                f6(r.truthful_std),
                f6(r.strategic_mean),
                f6(r.strategic_std),
                am,
                asd,
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
    }

    /// One line per fold evaluation.
    pub fn folds_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["classifier", "repeat", "fold", "truthful", "strategic", "auc", "skipped"])?;
        for f in &self.folds {
            let (t, s, a, skip) = match &f.outcome {
                FoldOutcome::Done { truthful, strategic, auc } => {
                    (f6(truthful.value()), f6(strategic.value()), auc.map(f6).unwrap_or_default(), String::new())
                }
                FoldOutcome::Skipped(why) => (String::new(), String::new(), String::new(), why.clone()),
            };
            w.write_record([f.classifier.label().to_string(), f.repeat.to_string(), f.fold.to_string(), t, s, a, skip])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
    }

    pub fn to_table(&self) -> String {
        let header = ["Classifier", "Tru.", "(sd)", "Str.", "(sd)", "AUC", "(sd)", "folds", "skipped"];
        let mut cells: Vec<Vec<String>> = vec![header.iter().map(|s| s.to_string()).collect()];
        for r in &self.rows {
            let (am, asd) = r.auc.map_or(("-".into(), "-".into()), |(m, s)| (format!("{m:.3}"), format!("{s:.3}")));
            cells.push(vec![
                r.classifier.label().to_string(),
                format!("{:.3}", r.truthful_mean),
                format!("{:.3}", r.truthful_std),
                format!("{:.3}", r.strategic_mean),
                format!("{:.3}", r.strategic_std),
                am,
                asd,
                r.folds.to_string(),
                r.skipped.to_string(),
            ]);
        }
        let widths: Vec<usize> = (0..header.len()).map(|c| cells.iter().map(|r| r[c].len()).max().unwrap_or(0)).collect();
        let mut out = String::new();
        for row in &cells {
            let line: Vec<String> = row
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(c, (s, w))| if c == 0 { format!("{s:<w$}") } else { format!("{s:>w$}") })
                .collect();
            let _ = writeln!(out, "{}", line.join("  ").trim_end());
        }
        out
    }
}

fn thread_count(cfg: &ExperimentConfig) -> usize {
    cfg.threads
        .or_else(|| std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse().ok()))
        .unwrap_or(0)
}

struct RepeatSetup {
    unmasked: Dataset,
    masked: Dataset,
    halves: (Vec<usize>, Vec<usize>),
}

fn setup_repeat(data: &Dataset, cfg: &ExperimentConfig, r: usize) -> Result<RepeatSetup> {
    let r = r as u64;
    let unmasked = if cfg.balance {
        data.select_rows(&balance_indices(data, derive_seed(cfg.seed, &[r, 0]))?)
    } else {
        data.clone()
    };
    let masked = mask_features(&unmasked, cfg.epsilon, derive_seed(cfg.seed, &[r, 1]))?;
    let halves = stratified_halves(&masked, derive_seed(cfg.seed, &[r, 2]));
    Ok(RepeatSetup { unmasked, masked, halves })
}

fn run_fold(setup: &RepeatSetup, cfg: &ExperimentConfig, r: usize, fold: usize) -> Result<Vec<FoldResult>> {
    let (a, b) = &setup.halves;
    let (train_idx, test_idx) = if fold == 0 { (a, b) } else { (b, a) };
    let opts = FoldOptions { top4: cfg.top4, discretize: cfg.discretize };
    let prepared = prepare_fold(&setup.unmasked, &setup.masked, train_idx, test_idx, opts)
        .map_err(|e| e.at(format!("preprocessing repeat {r} fold {fold}")))?;
    let single = |d: &Dataset| {
        let (n, p) = d.label_counts();
        n == 0 || p == 0
    };
    let skip = if single(&prepared.train) {
        Some("single-class training half")
    } else if single(&prepared.test) {
        Some("single-class test half")
    } else {
        None
    };
    cfg.classifiers
        .iter()
        .map(|&kind| {
            let outcome = match skip {
                Some(why) => FoldOutcome::Skipped(why.into()),
                None => {
                    let stage = || format!("{kind} repeat {r} fold {fold}");
                    let seed = derive_seed(cfg.seed, &[r as u64, 3, fold as u64]);
                    let eta = choose_learning_rate(kind, &prepared.train, cfg, seed).map_err(|e| e.at(stage()))?;
                    let model = fit_classifier(kind, &prepared.train, cfg, eta, seed).map_err(|e| e.at(stage()))?;
                    match evaluate(model.as_ref(), &prepared.test) {
                        Ok((truthful, strategic, auc)) => FoldOutcome::Done { truthful, strategic, auc },
                        Err(Error::LatticeTooLarge { present, limit }) => {
                            FoldOutcome::Skipped(format!("{present} features exceed enumeration limit {limit}"))
                        }
                        Err(e) => return Err(e.at(stage())),
                    }
                }
            };
            Ok(FoldResult { classifier: kind, repeat: r, fold, outcome })
        })
        .collect()
}

fn aggregate(kind: ClassifierKind, folds: &[FoldResult]) -> MetricRow {
    let mut t = Vec::new();
    let mut s = Vec::new();
    let mut a = Vec::new();
    let mut skipped = 0;
    for f in folds.iter().filter(|f| f.classifier == kind) {
        match &f.outcome {
            FoldOutcome::Done { truthful, strategic, auc } => {
                t.push(truthful.value());
                s.push(strategic.value());
                a.extend(auc);
            }
            FoldOutcome::Skipped(_) => skipped += 1,
        }
    }
    let (tm, tsd) = mean_std(&t).unwrap_or((f64::NAN, f64::NAN));
    let (sm, ssd) = mean_std(&s).unwrap_or((f64::NAN, f64::NAN));
    let auc = if !a.is_empty() && a.len() == t.len() { mean_std(&a) } else { None };
    MetricRow {
        classifier: kind,
        folds: t.len(),
        skipped,
        truthful_mean: tm,
        truthful_std: tsd,
        strategic_mean: sm,
        strategic_std: ssd,
        auc,
    }
}

/// Runs `repeats` rounds of: balance, mask, stratified 50/50 split, then
/// train on each half and test on the other. Deterministic in `cfg.seed`
/// regardless of thread count.
pub fn run_experiment(data: &Dataset, cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(thread_count(cfg))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| {
        let setups = (0..cfg.repeats)
            .into_par_iter()
            .map(|r| setup_repeat(data, cfg, r).map_err(|e| e.at(format!("repeat {r} setup"))))
            .collect::<Result<Vec<_>>>()?;
        let tasks: Vec<(usize, usize)> = (0..cfg.repeats).flat_map(|r| [(r, 0), (r, 1)]).collect();
        let folds: Vec<FoldResult> = tasks
            .par_iter()
            .map(|&(r, f)| run_fold(&setups[r], cfg, r, f))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .flatten()
            .collect();
        let rows = cfg.classifiers.iter().map(|&k| aggregate(k, &folds)).collect();
        Ok(ExperimentReport { rows, folds })
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{FeatureSchema, FeatureValue, FeatureVector, LabeledExample};

    fn synthetic(n: usize) -> Dataset {
        let rows = (0..n)
            .map(|i| {
                let a = (i * 37 % 101) as f64 / 100.0;
                let b = (i * 53 % 97) as f64 / 96.0;
                let c = (i * 11 % 7) as f64;
                let y = (a + 0.5 * b > 0.8) as u8;
                LabeledExample {
                    x: FeatureVector::new(vec![FeatureValue::Numeric(a), FeatureValue::Numeric(b), FeatureValue::Numeric(c)]),
                    y,
                }
            })
            .collect();
        Dataset::new(FeatureSchema::numeric(3).unwrap(), rows).unwrap()
    }

    #[test]
    fn parses_classifier_names() {
        assert_eq!("HC(LR)".parse::<ClassifierKind>().unwrap(), ClassifierKind::Hc);
        assert_eq!("ic-lr".parse::<ClassifierKind>().unwrap(), ClassifierKind::Iclr);
        assert_eq!("imp".parse::<ClassifierKind>().unwrap(), ClassifierKind::ImpLr);
        assert!("svm".parse::<ClassifierKind>().is_err());
        for k in ClassifierKind::ALL {
            assert_eq!(k.label().parse::<ClassifierKind>().unwrap(), k);
        }
    }

    #[test]
    fn truthful_models_have_equal_columns() {
        let cfg = ExperimentConfig {
            repeats: 2,
            classifiers: vec![ClassifierKind::Mincut, ClassifierKind::Hc, ClassifierKind::Iclr],
            discretize: true,
            threads: Some(2),
            ..ExperimentConfig::default()
        };
        let rep = run_experiment(&synthetic(160), &cfg).unwrap();
        assert_eq!(rep.rows.len(), 3);
        for f in &rep.folds {
            match &f.outcome {
                FoldOutcome::Done { truthful, strategic, .. } => assert_eq!(truthful, strategic),
                FoldOutcome::Skipped(why) => panic!("unexpected skip: {why}"),
            }
        }
    }

    #[test]
    fn always_accept_scores_base_rate() {
        let data = synthetic(120);
        let model = crate::strategic::Constant(1);
        let (t, s, a) = evaluate(&model, &data).unwrap();
        let (_, pos) = data.label_counts();
        assert_eq!(t.correct, pos);
        assert_eq!(s, t);
        assert_eq!(a, Some(0.5));
    }

    #[test]
    fn rerun_is_identical() {
        let cfg = ExperimentConfig {
            repeats: 1,
            classifiers: vec![ClassifierKind::ImpLr, ClassifierKind::Maj],
            ..ExperimentConfig::default()
        };
        let a = run_experiment(&synthetic(100), &cfg).unwrap();
        let b = run_experiment(&synthetic(100), &ExperimentConfig { threads: Some(1), ..cfg }).unwrap();
        assert_eq!(a.to_csv().unwrap(), b.to_csv().unwrap());
        assert_eq!(a.folds.len(), 4);
    }

    #[test]
    fn grid_search_runs() {
        let cfg = ExperimentConfig { repeats: 1, grid: true, classifiers: vec![ClassifierKind::Lr], ..ExperimentConfig::default() };
        let rep = run_experiment(&synthetic(80), &cfg).unwrap();
        assert_eq!(rep.rows[0].folds, 2);
    }

    #[test]
    fn bad_config_rejected() {
        let cfg = ExperimentConfig { epsilon: 1.0, ..ExperimentConfig::default() };
        assert!(run_experiment(&synthetic(40), &cfg).is_err());
        let cfg = ExperimentConfig { repeats: 0, ..ExperimentConfig::default() };
        assert!(run_experiment(&synthetic(40), &cfg).is_err());
    }
}
