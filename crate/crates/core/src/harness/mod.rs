//! Data loading, the cross-validation protocol, metrics, and experiment
//! orchestration.

pub mod csvio;
pub mod example1;
pub mod experiment;
pub mod metrics;
pub mod modelfile;
pub mod protocol;

pub use csvio::{load_csv, read_csv, CsvOptions};
pub use experiment::{run_experiment, ClassifierKind, ExperimentConfig, ExperimentReport, MetricRow};
pub use metrics::auc;
pub use modelfile::{train_saved, SavedModel};
pub use protocol::{mask_features, undersample_balance};
