//! Flat run configuration: defaults, then the config file, then flags.

use std::path::Path;

use m3net_core::data::SynthConfig;
use m3net_core::model::LossWeights;
use m3net_core::nn::{LrSchedule, SgdConfig};
use m3net_core::stats::BootstrapConfig;
use m3net_core::training::TrainConfig;
use m3net_core::{ModelConfig, Variant};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Every tunable of a run as one flat table. Unset synth fractions share
/// whatever the set ones leave, in proportion to their defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub variant: Variant,
    pub dim: usize,

    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub lr_decay: f64,
    pub lr_milestones: Vec<usize>,
    pub momentum: f64,
    pub weight_decay: f64,
    pub lambda_img: f64,
    pub lambda_bio: f64,
    pub lambda_cmb: f64,
    pub seed: u64,
    pub folds: usize,
    pub stratify_folds: bool,
    pub vary_init_across_folds: bool,
    pub pooled_auc: bool,
    pub jobs: usize,

    pub n: usize,
    pub frac_both: Option<f64>,
    pub frac_image_only: Option<f64>,
    pub frac_bio_only: Option<f64>,
    pub bio_signal: f64,
    pub image_signal: f64,
    pub key_instance_rate: f64,
    pub complementarity: f64,
    pub positive_rate: f64,
    pub missingness_label_bias: f64,
    pub cohort_seed: u64,
    pub id_prefix: String,

    pub bootstrap_resamples: usize,
    pub bootstrap_seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let m = ModelConfig::default();
        let t = TrainConfig::default();
        let s = SynthConfig::default();
        let b = BootstrapConfig::default();
        Self {
            variant: m.variant,
            dim: m.dim,
            epochs: t.epochs,
            batch_size: t.batch_size,
            lr: t.schedule.initial,
            lr_decay: t.schedule.decay_factor,
            lr_milestones: t.schedule.milestones,
            momentum: t.sgd.momentum,
            weight_decay: t.sgd.weight_decay,
            lambda_img: t.loss_weights.img,
            lambda_bio: t.loss_weights.bio,
            lambda_cmb: t.loss_weights.cmb,
            seed: t.seed,
            folds: t.folds,
            stratify_folds: t.stratify_folds,
            vary_init_across_folds: t.vary_init_across_folds,
            pooled_auc: t.pooled_auc,
            jobs: t.jobs,
            n: s.n,
            frac_both: None,
            frac_image_only: None,
            frac_bio_only: None,
            bio_signal: s.bio_signal,
            image_signal: s.image_signal,
            key_instance_rate: s.key_instance_rate,
            complementarity: s.complementarity,
            positive_rate: s.positive_rate,
            missingness_label_bias: s.missingness_label_bias,
            cohort_seed: s.seed,
            id_prefix: s.id_prefix,
            bootstrap_resamples: b.n_resamples,
            bootstrap_seed: b.seed,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn model(&self) -> ModelConfig {
        ModelConfig {
            variant: self.variant,
            dim: self.dim,
            ..ModelConfig::default()
        }
    }

    pub fn train(&self) -> TrainConfig {
        TrainConfig {
            model: self.model(),
            epochs: self.epochs,
            batch_size: self.batch_size,
            schedule: LrSchedule {
                initial: self.lr,
                decay_factor: self.lr_decay,
                milestones: self.lr_milestones.clone(),
            },
            sgd: SgdConfig {
                momentum: self.momentum,
                weight_decay: self.weight_decay,
            },
            loss_weights: LossWeights {
                img: self.lambda_img,
                bio: self.lambda_bio,
                cmb: self.lambda_cmb,
            },
            seed: self.seed,
            folds: self.folds,
            stratify_folds: self.stratify_folds,
            vary_init_across_folds: self.vary_init_across_folds,
            pooled_auc: self.pooled_auc,
            jobs: self.jobs,
        }
    }

    pub fn synth(&self) -> SynthConfig {
        let d = SynthConfig::default();
        let given = [self.frac_both, self.frac_image_only, self.frac_bio_only];
        let defaults = [d.frac_both, d.frac_image_only, d.frac_bio_only];
        let set: f64 = given.iter().flatten().sum();
        let unset_default: f64 = given
            .iter()
            .zip(defaults)
            .filter(|(g, _)| g.is_none())
            .map(|(_, v)| v)
            .sum();
        let remainder = (1.0 - set).max(0.0);
        let frac = |i: usize| match given[i] {
            Some(v) => v,
            None if given.iter().all(Option::is_none) => defaults[i],
            None if unset_default > 0.0 => remainder * defaults[i] / unset_default,
            None => 0.0,
        };
        SynthConfig {
            n: self.n,
            frac_both: frac(0),
            frac_image_only: frac(1),
            frac_bio_only: frac(2),
            bio_signal: self.bio_signal,
            image_signal: self.image_signal,
            key_instance_rate: self.key_instance_rate,
            complementarity: self.complementarity,
            positive_rate: self.positive_rate,
            missingness_label_bias: self.missingness_label_bias,
            seed: self.cohort_seed,
            id_prefix: self.id_prefix.clone(),
            ..d
        }
    }

    pub fn bootstrap(&self) -> BootstrapConfig {
        BootstrapConfig {
            n_resamples: self.bootstrap_resamples,
            seed: self.bootstrap_seed,
            jobs: self.jobs,
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        self.train().validate()?;
        self.synth().validate()?;
        if self.bootstrap_resamples == 0 {
            return Err(CliError::Config("bootstrap_resamples must be at least 1".into()));
        }
        Ok(())
    }
}
