//! Multi-path fusion network for binary risk prediction from incomplete
//! pairs of image-derived nodule features and biomarker vectors.
//!
//! Subjects may carry either modality or both. The image path pools a padded
//! bag of nodule features with attention, the biomarker path is a small dense
//! network, and a combined path fuses the two for complete subjects. Each
//! path has its own cross-entropy term; terms whose modalities are missing
//! are masked out, so subjects with a single modality still train their path.

pub mod artifact;
pub mod data;
pub mod diagnostics;
pub mod error;
pub mod model;
pub mod nn;
pub mod seed;
pub mod stats;
pub mod training;

pub use error::{Error, ErrorKind, Result};
pub use model::{ForwardOutput, M3Net, ModelConfig, SubjectFeatures, Variant};
