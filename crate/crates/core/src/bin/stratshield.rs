use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use stratshield::ensemble::anova_f_rank;
use stratshield::features::{Dataset, DEFAULT_ENUMERATION_LIMIT};
use stratshield::harness::csvio::read_csv_with_schema;
use stratshield::harness::experiment::evaluate;
use stratshield::harness::{
    example1, load_csv, mask_features, run_experiment, train_saved, undersample_balance, ClassifierKind, CsvOptions,
    ExperimentConfig, SavedModel,
};
use stratshield::strategic::{audit_truthfulness, audit_truthfulness_exhaustive};
use stratshield::{Error, Result};

#[derive(Parser)]
#[command(name = "stratshield", version, about = "Classifiers that cannot be gamed by hiding features")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit one model on a CSV and write it to a model file.
    Train(TrainArgs),
    /// Score a saved model on a CSV, with and without strategic withholding.
    Evaluate(EvaluateArgs),
    /// Run repeated 2-fold cross-validation and print the accuracy table.
    Experiment(ExperimentArgs),
    /// Solve the two-test admissions toy with Mincut.
    Example1,
    /// Check that no row gains by hiding features from a saved model.
    Audit(AuditArgs),
}

#[derive(Args)]
struct DataArgs {
    /// CSV file with a header row.
    #[arg(long)]
    dataset: PathBuf,
    /// Label column; defaults to the last column.
    #[arg(long)]
    label: Option<String>,
    /// Label value treated as positive; others are negative.
    #[arg(long)]
    positive: Option<String>,
    /// Cell values read as missing.
    #[arg(long, value_delimiter = ',', default_value = "?,,NA")]
    missing_tokens: Vec<String>,
    /// Columns forced to be categorical.
    #[arg(long, value_delimiter = ',')]
    categorical: Vec<String>,
}

impl DataArgs {
    fn options(&self) -> CsvOptions {
        CsvOptions {
            label: self.label.clone(),
            missing_tokens: self.missing_tokens.clone(),
            categorical: self.categorical.clone(),
            positive: self.positive.clone(),
        }
    }

    fn load(&self) -> Result<Dataset> {
        load_csv(&self.dataset, &self.options()).map_err(|e| e.at("loading dataset"))
    }

    fn load_for(&self, model: &SavedModel) -> Result<Dataset> {
        let file = fs::File::open(&self.dataset).map_err(|e| Error::Io(format!("{}: {e}", self.dataset.display())))?;
        read_csv_with_schema(file, &self.options(), model.input_schema()).map_err(|e| e.at("loading dataset"))
    }
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    /// One of lr, iclr, hc, mincut.
    #[arg(long, default_value = "hc")]
    classifier: ClassifierKind,
    #[arg(long)]
    balance: bool,
    /// Keep the four attributes with the largest ANOVA F.
    #[arg(long)]
    top4: bool,
    #[arg(long)]
    discretize: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also clamp the intercept of IC-LR models at zero.
    #[arg(long)]
    clamp_intercept: bool,
    /// Model file to write.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    model: PathBuf,
    /// Fraction of cells to blank before scoring.
    #[arg(long, default_value_t = 0.0)]
    epsilon: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the scores as CSV here instead of printing them.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value_t = 0.2)]
    epsilon: f64,
    /// Undersample the majority class before each repeat.
    #[arg(long)]
    balance: bool,
    #[arg(long)]
    top4: bool,
    #[arg(long)]
    discretize: bool,
    #[arg(long, value_delimiter = ',', default_value = "maj,imp,rf,mincut,hc,iclr")]
    classifiers: Vec<ClassifierKind>,
    #[arg(long, default_value_t = 10)]
    repeats: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Pick the learning rate by inner 5-fold cross-validation.
    #[arg(long)]
    grid: bool,
    #[arg(long)]
    clamp_intercept: bool,
    /// Summary CSV path; the aligned table always goes to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-fold CSV path.
    #[arg(long)]
    folds_out: Option<PathBuf>,
}

#[derive(Args)]
struct AuditArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    model: PathBuf,
    /// Random projections per row; the full lattice is checked when absent.
    #[arg(long)]
    trials: Option<usize>,
    /// Largest number of present features to enumerate.
    #[arg(long, default_value_t = DEFAULT_ENUMERATION_LIMIT)]
    limit: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn write_out(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn read_model(path: &Path) -> Result<SavedModel> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    SavedModel::from_text(&text).map_err(|e| e.at("reading model"))
}

fn train(a: TrainArgs) -> Result<()> {
    let mut data = a.data.load()?;
    if a.balance {
        data = undersample_balance(&data, a.seed)?;
    }
    if a.top4 && data.arity() > 4 {
        let mut top = anova_f_rank(&data)[..4].to_vec();
        top.sort_unstable();
        data = data.select_features(&top)?;
    }
    let mut cfg = ExperimentConfig { discretize: a.discretize, ..ExperimentConfig::default() };
    cfg.train.clamp_intercept = a.clamp_intercept;
    let model = train_saved(a.classifier, &data, &cfg, a.seed).map_err(|e| e.at("training"))?;
    write_out(&a.out, &model.to_text())?;
    println!("wrote {} model on {} rows to {}", model.kind(), data.len(), a.out.display());
    Ok(())
}

fn evaluate_cmd(a: EvaluateArgs) -> Result<()> {
    let model = read_model(&a.model)?;
    let data = mask_features(&a.data.load_for(&model)?, a.epsilon, a.seed)?;
    let (truthful, strategic, auc) = evaluate(model.classifier(), &data).map_err(|e| e.at("scoring"))?;
    let auc_text = auc.map(|v| format!("{v:.6}")).unwrap_or_default();
    match a.out {
        Some(path) => {
            let mut w = csv::Writer::from_writer(Vec::new());
            let rows = data.len().to_string();
            let (t, s) = (format!("{:.6}", truthful.value()), format!("{:.6}", strategic.value()));
            w.write_record(["classifier", "rows", "truthful", "strategic", "auc"])?;
            w.write_record([model.kind().label(), &rows, &t, &s, &auc_text])?;
            let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
            write_out(&path, &String::from_utf8_lossy(&bytes))
        }
        None => {
            println!("classifier: {}", model.kind());
            println!("truthful accuracy: {truthful} = {:.6}", truthful.value());
            println!("strategic accuracy: {strategic} = {:.6}", strategic.value());
            if auc.is_some() {
                println!("auc: {auc_text}");
            }
            Ok(())
        }
    }
}

fn experiment(a: ExperimentArgs) -> Result<()> {
    let data = a.data.load()?;
    let mut cfg = ExperimentConfig {
        epsilon: a.epsilon,
        balance: a.balance,
        top4: a.top4,
        discretize: a.discretize,
        classifiers: a.classifiers,
        repeats: a.repeats,
        seed: a.seed,
        grid: a.grid,
        ..ExperimentConfig::default()
    };
    cfg.train.clamp_intercept = a.clamp_intercept;
    let report = run_experiment(&data, &cfg)?;
    print!("{}", report.to_table());
    if let Some(path) = a.out {
        write_out(&path, &report.to_csv()?)?;
    }
    if let Some(path) = a.folds_out {
        write_out(&path, &report.folds_csv()?)?;
    }
    Ok(())
}

fn audit(a: AuditArgs) -> Result<()> {
    let model = read_model(&a.model)?;
    let data = a.data.load_for(&model)?;
    let f = model.classifier();
    let report = match a.trials {
        Some(t) => audit_truthfulness(f, &data, t, a.seed),
        None => audit_truthfulness_exhaustive(f, &data, a.limit)?,
    };
    println!(
        "{}: {} rows, {} comparisons, {} violations",
        model.kind(),
        report.rows_checked,
        report.comparisons,
        report.violations.len()
    );
    let schema = model.input_schema();
    for v in report.violations.iter().take(10) {
        println!(
            "row {}: {} is accepted but {} is not",
            v.row + 2,
            schema.format_vector(&v.report),
            schema.format_vector(&v.source)
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(a) => train(a),
        Command::Evaluate(a) => evaluate_cmd(a),
        Command::Experiment(a) => experiment(a),
        Command::Example1 => example1::run().map(|r| print!("{}", r.to_text())),
        Command::Audit(a) => audit(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
