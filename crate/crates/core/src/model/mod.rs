//! The three-path fusion network: an attention-pooled image path, a dense
//! biomarker path and a combined path, each with its own two-class head.

mod attention;
mod config;
mod features;
mod network;

pub use attention::AttentionPool;
pub use config::{ModelConfig, Variant};
pub use features::{ImageBag, ModalityMask, SubjectFeatures};
pub use network::{
    ForwardOutput, LossBreakdown, LossWeights, M3Net, M3NetParams, ParamPath, RiskSource,
};
