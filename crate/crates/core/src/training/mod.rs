//! Training loop, checkpoint selection and the experiment drivers.

mod config;
mod experiment;
mod report;
mod trainer;

pub use config::TrainConfig;
pub use experiment::{cross_validate, ensemble_mean, external_validate, run_baseline_complete_only};
pub use report::{
    render_table, EnsemblePrediction, ExperimentKind, ExperimentReport, ExperimentSeeds, ExternalSummary,
    FoldResult, Head, HeadAucs, HeadSummary, MeanStd, Prediction, TrainingSubset,
};
pub use trainer::{train, train_with_seeds, Checkpoint, EpochStats, TrainSeeds};
