//! Cohort records, JSON-lines ingestion, normalization, fold splitting and
//! the synthetic cohort generator.

mod io;
mod normalize;
mod record;
mod split;
mod synth;

pub use io::{load_cohort, parse_cohort, read_folds, write_cohort, write_folds, LoadOptions};
pub use normalize::{compute_normalization, ChannelStats, NormalizationStats};
pub use record::{strata_counts, CohortSchema, StrataCounts, SubjectRecord};
pub use split::{kfold_split, split_train_val, FoldSplit};
pub use synth::{generate_synthetic_cohort, SynthConfig};
