//! Synthetic cohorts with the missingness structure of a clinical cohort and
//! planted, complementary signals in both modalities.
//!
//! Biomarkers: standard-normal channels with a label-dependent shift on the
//! blood channel, three further channels and a mayo channel correlated with
//! blood, then mapped to heterogeneous raw scales.
//!
//! Images: 1 to 5 real instances of isotropic noise. Positive subjects get at
//! least one key instance shifted along a fixed direction; negatives get none.
//!
//! Complementarity `c` splits positives into two equally likely subtypes:
//! image-dominant ones get the image shift scaled by `1 + c` and the
//! biomarker shift by `1 - c`, biomarker-dominant ones the reverse. Class
//! means are unchanged, but a positive faint in one modality is clear in the
//! other.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{CohortSchema, SubjectRecord};
use crate::error::{Error, Result};
use crate::model::ImageBag;
use crate::seed::{derive_seed, derived_rng, rng_from_seed, STREAM_COHORT};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n: usize,
    pub frac_both: f64,
    pub frac_image_only: f64,
    pub frac_bio_only: f64,
    /// Mean separation (in noise standard deviations) of informative
    /// biomarker channels between the classes.
    pub bio_signal: f64,
    /// Length of the shift applied to key instances.
    pub image_signal: f64,
    /// Probability that a real instance of a positive bag is a key instance.
    pub key_instance_rate: f64,
    /// In `[0, 1]`; 0 makes the two modalities' signals independent.
    pub complementarity: f64,
    pub positive_rate: f64,
    /// 0 gives missingness completely at random. Positive values make
    /// positives more likely to land in the complete stratum.
    pub missingness_label_bias: f64,
    pub seed: u64,
    pub id_prefix: String,
    pub site: Option<String>,
    pub biomarker_width: usize,
    pub image_feature_width: usize,
    pub bag_capacity: usize,
    pub blood_index: usize,
    pub mayo_index: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n: 1232,
            frac_both: 383.0 / 1232.0,
            frac_image_only: 647.0 / 1232.0,
            frac_bio_only: 202.0 / 1232.0,
            bio_signal: 1.5,
            image_signal: 5.0,
            key_instance_rate: 0.5,
            complementarity: 0.9,
            positive_rate: 0.5,
            missingness_label_bias: 0.0,
            seed: 0,
            id_prefix: "S".to_owned(),
            site: None,
            biomarker_width: 10,
            image_feature_width: 128,
            bag_capacity: 5,
            blood_index: 0,
            mayo_index: 9,
        }
    }
}

/// Channels of the key-instance direction.
const KEY_DIRECTION_CHANNELS: usize = 16;

impl SynthConfig {
    /// A fully observed external-style cohort.
    pub fn external(n: usize, seed: u64) -> Self {
        Self {
            n,
            frac_both: 1.0,
            frac_image_only: 0.0,
            frac_bio_only: 0.0,
            seed,
            id_prefix: "X".to_owned(),
            ..Self::default()
        }
    }

    pub fn schema(&self) -> CohortSchema {
        CohortSchema {
            biomarker_width: self.biomarker_width,
            image_feature_width: self.image_feature_width,
            bag_capacity: self.bag_capacity,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let f = [self.frac_both, self.frac_image_only, self.frac_bio_only];
        if f.iter().any(|x| !(0.0..=1.0).contains(x)) {
            return Err(Error::InvalidConfig(format!("stratum fractions {f:?} must lie in [0, 1]")));
        }
        if (f.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidConfig(format!("stratum fractions {f:?} must sum to 1")));
        }
        if self.n == 0 {
            return Err(Error::InvalidConfig("n must be positive".into()));
        }
        if [self.key_instance_rate, self.positive_rate, self.complementarity]
            .iter()
            .any(|x| !(0.0..=1.0).contains(x))
        {
            return Err(Error::InvalidConfig(
                "key_instance_rate, positive_rate and complementarity must lie in [0, 1]".into(),
            ));
        }
        if self.missingness_label_bias < 0.0 {
            return Err(Error::InvalidConfig("missingness_label_bias must be >= 0".into()));
        }
        if self.blood_index == self.mayo_index
            || self.blood_index.max(self.mayo_index) >= self.biomarker_width
            || self.biomarker_width < 4
        {
            return Err(Error::InvalidConfig(
                "blood/mayo indices must be distinct and inside a biomarker vector of width >= 4".into(),
            ));
        }
        if self.image_feature_width < KEY_DIRECTION_CHANNELS || self.bag_capacity == 0 {
            return Err(Error::InvalidConfig(format!(
                "image_feature_width must be >= {KEY_DIRECTION_CHANNELS} and bag_capacity >= 1"
            )));
        }
        Ok(())
    }

    /// Exact stratum sizes `(both, image_only, bio_only)`: floor of
    /// `n * fraction` for the two single-modality strata, remainder to both.
    pub fn stratum_sizes(&self) -> (usize, usize, usize) {
        // the epsilon absorbs representation error in fractions like 647/1232
        let floor = |f: f64| ((self.n as f64) * f + 1e-9).floor() as usize;
        let image_only = floor(self.frac_image_only);
        let bio_only = floor(self.frac_bio_only);
        (self.n - image_only - bio_only, image_only, bio_only)
    }

    fn informative_channels(&self) -> Vec<(usize, f64)> {
        let mut out = vec![(self.blood_index, 1.0)];
        let mut extra = (0..self.biomarker_width)
            .filter(|c| *c != self.blood_index && *c != self.mayo_index);
        for w in [0.7, 0.5, 0.3] {
            if let Some(c) = extra.next() {
                out.push((c, w));
            }
        }
        out
    }
}

fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

fn biomarkers<R: Rng + ?Sized>(cfg: &SynthConfig, label: u8, factor: f64, rng: &mut R) -> Vec<f64> {
    // class separation scales with the factor; positives average +0.5
    let s = if label == 1 { factor - 0.5 } else { -0.5 };
    let mut z: Vec<f64> = (0..cfg.biomarker_width).map(|_| normal(rng)).collect();
    for (c, w) in cfg.informative_channels() {
        z[c] += cfg.bio_signal * s * w;
    }
    z[cfg.mayo_index] = 0.5 * z[cfg.blood_index] + 0.75f64.sqrt() * z[cfg.mayo_index]
        + cfg.bio_signal * s * 0.5;
    z.iter()
        .enumerate()
        .map(|(c, v)| 2.0 + c as f64 + (0.5 + 0.25 * c as f64) * v)
        .collect()
}

fn image_bag<R: Rng + ?Sized>(cfg: &SynthConfig, label: u8, factor: f64, rng: &mut R) -> Result<ImageBag> {
    let count = rng.random_range(1..=cfg.bag_capacity);
    let mut key = vec![false; count];
    if label == 1 {
        for k in key.iter_mut() {
            *k = rng.random_bool(cfg.key_instance_rate);
        }
        if !key.iter().any(|k| *k) {
            let forced = rng.random_range(0..count);
            key[forced] = true;
        }
    }
    let shift = factor * cfg.image_signal / (KEY_DIRECTION_CHANNELS as f64).sqrt();
    let rows: Vec<Vec<f64>> = key
        .iter()
        .map(|&is_key| {
            (0..cfg.image_feature_width)
                .map(|j| {
                    let mut v = normal(rng);
                    if is_key && j < KEY_DIRECTION_CHANNELS {
                        v += shift;
                    }
                    0.1 * (j % 7) as f64 + v
                })
                .collect()
        })
        .collect();
    ImageBag::padded(&rows, cfg.image_feature_width, cfg.bag_capacity)
}

/// Deterministic synthetic cohort. Stratum sizes are exact; which subjects
/// land in which stratum is independent of the label unless
/// `missingness_label_bias > 0`.
pub fn generate_synthetic_cohort(cfg: &SynthConfig) -> Result<Vec<SubjectRecord>> {
    cfg.validate()?;
    let master = derive_seed(cfg.seed, STREAM_COHORT);
    let mut rng = rng_from_seed(master);
    let labels: Vec<u8> = (0..cfg.n)
        .map(|_| u8::from(rng.random_bool(cfg.positive_rate)))
        .collect();

    // stratum assignment: rank subjects by a random key, optionally tilted
    // by the label, and deal the strata in order both → image → bio
    let mut order: Vec<(f64, usize)> = (0..cfg.n)
        .map(|i| {
            let u: f64 = rng.random();
            (u + cfg.missingness_label_bias * f64::from(labels[i]), i)
        })
        .collect();
    if cfg.missingness_label_bias == 0.0 {
        order.shuffle(&mut rng);
    } else {
        order.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    }
    let (n_both, n_image, _) = cfg.stratum_sizes();
    let mut stratum = vec![(true, true); cfg.n];
    for (rank, (_, i)) in order.iter().enumerate() {
        stratum[*i] = if rank < n_both {
            (true, true)
        } else if rank < n_both + n_image {
            (true, false)
        } else {
            (false, true)
        };
    }

    let width = (cfg.n.max(1) as f64).log10().floor() as usize + 1;
    (0..cfg.n)
        .map(|i| {
            let mut rng = derived_rng(master, i as u64 + 1);
            let label = labels[i];
            let (has_image, has_bio) = stratum[i];
            let c = cfg.complementarity;
            let (image_factor, bio_factor) = if rng.random_bool(0.5) {
                (1.0 + c, 1.0 - c)
            } else {
                (1.0 - c, 1.0 + c)
            };
            let biomarkers = has_bio.then(|| biomarkers(cfg, label, bio_factor, &mut rng));
            let image_bag = has_image
                .then(|| image_bag(cfg, label, image_factor, &mut rng))
                .transpose()?;
            Ok(SubjectRecord {
                id: format!("{}{:0width$}", cfg.id_prefix, i),
                label,
                biomarkers,
                image_bag,
                site: cfg.site.clone(),
            })
        })
        .collect()
}
