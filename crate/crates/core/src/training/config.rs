use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{LossWeights, ModelConfig};
use crate::nn::{LrSchedule, SgdConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub model: ModelConfig,
    pub epochs: usize,
    pub batch_size: usize,
    pub schedule: LrSchedule,
    pub sgd: SgdConfig,
    pub loss_weights: LossWeights,
    /// Master seed; split, initialization and shuffle streams derive from it.
    pub seed: u64,
    pub folds: usize,
    /// Deal folds by label so every fold has both classes.
    pub stratify_folds: bool,
    /// Give each fold model its own initialization draw. When false all fold
    /// models start from the same parameters.
    pub vary_init_across_folds: bool,
    /// Headline cross-validation AUC pooled over folds instead of the
    /// per-fold mean.
    pub pooled_auc: bool,
    /// Worker threads across folds; results do not depend on it.
    pub jobs: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            model: ModelConfig::default(),
            epochs: 100,
            batch_size: 32,
            schedule: LrSchedule::default(),
            sgd: SgdConfig::default(),
            loss_weights: LossWeights::default(),
            seed: 0,
            folds: 5,
            stratify_folds: false,
            vary_init_across_folds: true,
            pooled_auc: false,
            jobs: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.epochs == 0 {
            return bad("epochs must be at least 1".into());
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1".into());
        }
        if self.folds < 2 {
            return bad(format!("folds = {}; need at least 2", self.folds));
        }
        if self.jobs == 0 {
            return bad("jobs must be at least 1".into());
        }
        let s = &self.schedule;
        if !(s.initial.is_finite() && s.initial >= 0.0) {
            return bad(format!("learning rate {} must be finite and non-negative", s.initial));
        }
        if !(s.decay_factor.is_finite() && s.decay_factor > 0.0) {
            return bad(format!("decay factor {} must be positive", s.decay_factor));
        }
        if !(0.0..1.0).contains(&self.sgd.momentum) {
            return bad(format!("momentum {} must lie in [0, 1)", self.sgd.momentum));
        }
        if !(self.sgd.weight_decay.is_finite() && self.sgd.weight_decay >= 0.0) {
            return bad(format!("weight decay {} must be non-negative", self.sgd.weight_decay));
        }
        let w = self.loss_weights;
        if ![w.img, w.bio, w.cmb].iter().all(|x| x.is_finite() && *x >= 0.0) {
            return bad("loss weights must be finite and non-negative".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        TrainConfig::default().validate().unwrap();
    }

    #[test]
    fn zero_epochs_rejected() {
        let c = TrainConfig { epochs: 0, ..Default::default() };
        assert!(matches!(c.validate(), Err(Error::InvalidConfig(_))));
        let c = TrainConfig { batch_size: 0, ..Default::default() };
        assert!(c.validate().is_err());
    }
}
