use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::TrainConfig;
use crate::data::{compute_normalization, NormalizationStats, SubjectRecord};
use crate::error::{Error, Result};
use crate::model::{M3Net, SubjectFeatures};
use crate::nn::{Parameterized, Sgd};
use crate::seed::{derive_seed, rng_from_seed, STREAM_INIT, STREAM_SHUFFLE, STREAM_TRAIN};
use crate::stats::auc_slices;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub learning_rate: f64,
    /// Mean over batches of the weighted masked loss.
    pub train_loss: f64,
    pub val_auc: f64,
}

/// Seeds of one training run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainSeeds {
    pub init: u64,
    pub shuffle: u64,
}

impl TrainSeeds {
    pub fn from_master(seed: u64) -> Self {
        Self {
            init: derive_seed(seed, STREAM_INIT),
            shuffle: derive_seed(seed, STREAM_SHUFFLE),
        }
    }
}

/// The best epoch of a run: model, the normalization it was trained under,
/// and the full per-epoch history.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub epoch: usize,
    pub model: M3Net,
    pub normalization: NormalizationStats,
    pub val_auc: f64,
    pub history: Vec<EpochStats>,
    pub seeds: TrainSeeds,
}

impl Checkpoint {
    /// Normalizes `record` with the training statistics and routes it.
    pub fn predict(&self, record: &SubjectRecord) -> Result<(f64, crate::model::RiskSource)> {
        self.model.predict_risk(&self.normalization.apply(record)?)
    }
}

pub(crate) fn normalize_all(
    stats: &NormalizationStats,
    records: &[&SubjectRecord],
) -> Result<Vec<(SubjectFeatures, u8)>> {
    records
        .iter()
        .map(|r| Ok((stats.apply(r)?, r.label)))
        .collect()
}

/// Routed-risk AUC of `model` over already-normalized subjects.
pub(crate) fn routed_auc(model: &M3Net, subjects: &[(SubjectFeatures, u8)]) -> Result<f64> {
    let mut scores = Vec::with_capacity(subjects.len());
    for (f, _) in subjects {
        let (risk, _) = model.predict_risk(f)?;
        if !risk.is_finite() {
            return Err(Error::NonFinite("validation risk"));
        }
        scores.push(risk);
    }
    let labels: Vec<u8> = subjects.iter().map(|(_, l)| *l).collect();
    auc_slices(&labels, &scores)
}

/// Trains with seeds derived from `config.seed`.
pub fn train(train: &[&SubjectRecord], val: &[&SubjectRecord], config: &TrainConfig) -> Result<Checkpoint> {
    train_with_seeds(train, val, config, TrainSeeds::from_master(config.seed))
}

/// Mini-batch SGD on the masked loss. Normalization statistics come from
/// `train` alone. After every epoch the validation AUC of the routed risk is
/// recorded; the returned checkpoint is the first epoch attaining the maximum.
pub fn train_with_seeds(
    train: &[&SubjectRecord],
    val: &[&SubjectRecord],
    config: &TrainConfig,
    seeds: TrainSeeds,
) -> Result<Checkpoint> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::Data("training set is empty".into()));
    }
    if val.is_empty() {
        return Err(Error::Data("validation set is empty".into()));
    }
    let normalization = compute_normalization(train)?;
    let train_set = normalize_all(&normalization, train)?;
    let val_set = normalize_all(&normalization, val)?;

    let mut model = M3Net::new(config.model.clone(), &mut rng_from_seed(seeds.init))?;
    let mut sgd = Sgd::new(config.sgd);
    let mut shuffle_rng = rng_from_seed(seeds.shuffle);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);
    let mut best: Option<(usize, f64, M3Net)> = None;

    for epoch in 0..config.epochs {
        let lr = config.schedule.rate(epoch);
        order.shuffle(&mut shuffle_rng);
        let mut loss_sum = 0.0;
        let mut batches = 0;
        for (b, chunk) in order.chunks(config.batch_size).enumerate() {
            let batch: Vec<(&SubjectFeatures, u8)> =
                chunk.iter().map(|&i| (&train_set[i].0, train_set[i].1)).collect();
            model.zero_grad();
            let loss = model.masked_loss_backward(&batch, config.loss_weights)?;
            if !loss.total.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, batch: b });
            }
            sgd.step(model.params_mut(), lr);
            loss_sum += loss.total;
            batches += 1;
        }
        let val_auc = routed_auc(&model, &val_set)?;
        history.push(EpochStats {
            epoch,
            learning_rate: lr,
            train_loss: loss_sum / batches as f64,
            val_auc,
        });
        if best.as_ref().is_none_or(|(_, a, _)| val_auc > *a) {
            best = Some((epoch, val_auc, model.clone()));
        }
    }
    let (epoch, val_auc, model) = best.expect("epochs >= 1");
    Ok(Checkpoint {
        epoch,
        model,
        normalization,
        val_auc,
        history,
        seeds,
    })
}

/// A training seed set derived for fold `fold` of an experiment.
pub(crate) fn fold_seeds(master: u64, fold: usize, vary_init: bool) -> TrainSeeds {
    let base = TrainSeeds::from_master(derive_seed(master, STREAM_TRAIN));
    let fold_tag = fold as u64 + 1;
    TrainSeeds {
        init: if vary_init { derive_seed(base.init, fold_tag) } else { base.init },
        shuffle: derive_seed(base.shuffle, fold_tag),
    }
}
