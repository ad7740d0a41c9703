//! Full-model gradient checks over the three modality situations.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::{ImageBag, LossWeights, M3Net, ModelConfig, SubjectFeatures};
use crate::nn::{grad_check, GradCheckReport, Parameterized};
use crate::seed::{derived_rng, Rng as SeededRng, STREAM_INIT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Situation {
    ImageOnly,
    BioOnly,
    Complete,
}

impl Situation {
    pub const ALL: [Situation; 3] = [Situation::ImageOnly, Situation::BioOnly, Situation::Complete];

    pub fn as_str(self) -> &'static str {
        match self {
            Situation::ImageOnly => "image-only",
            Situation::BioOnly => "bio-only",
            Situation::Complete => "complete",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckOptions {
    pub step: f64,
    pub seed: u64,
    /// Subjects in the checked batch.
    pub batch: usize,
    /// Added to one analytic gradient entry before comparison; a negative
    /// control for the checker itself.
    pub perturb_analytic: Option<f64>,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self {
            step: 1e-5,
            seed: 0,
            batch: 3,
            perturb_analytic: None,
        }
    }
}

fn random_subject(config: &ModelConfig, situation: Situation, rng: &mut SeededRng) -> Result<SubjectFeatures> {
    let image = match situation {
        Situation::BioOnly => None,
        _ => {
            // at least two real instances so the attention weights matter
            let count = rng.random_range(2..=config.bag_capacity.max(2));
            let rows: Vec<Vec<f64>> = (0..count)
                .map(|_| {
                    (0..config.image_feature_width)
                        .map(|_| rng.sample::<f64, _>(StandardNormal))
                        .collect()
                })
                .collect();
            Some(ImageBag::padded(&rows, config.image_feature_width, config.bag_capacity.max(count))?)
        }
    };
    let biomarkers = match situation {
        Situation::ImageOnly => None,
        _ => Some(
            (0..config.biomarker_width)
                .map(|_| rng.sample::<f64, _>(StandardNormal))
                .collect(),
        ),
    };
    Ok(SubjectFeatures { image, biomarkers })
}

/// Builds a random model and batch for `situation`, backpropagates the
/// masked loss and compares against central differences.
pub fn check_model_gradients(
    config: &ModelConfig,
    situation: Situation,
    opts: &GradCheckOptions,
) -> Result<GradCheckReport> {
    let mut rng = derived_rng(opts.seed, STREAM_INIT);
    let mut model = M3Net::new(config.clone(), &mut rng)?;
    let subjects = (0..opts.batch.max(1))
        .map(|_| random_subject(config, situation, &mut rng))
        .collect::<Result<Vec<_>>>()?;
    let labels: Vec<u8> = (0..subjects.len()).map(|i| (i % 2) as u8).collect();
    let batch: Vec<(&SubjectFeatures, u8)> = subjects.iter().zip(labels.iter().copied()).collect();
    let weights = LossWeights::default();

    model.zero_grad();
    model.masked_loss_backward(&batch, weights)?;
    if let Some(delta) = opts.perturb_analytic {
        // first entry of the first tensor the situation actually trains
        let target = match situation {
            Situation::BioOnly => 6,
            _ => 0,
        };
        model.params_mut()[target].grad_mut()[0] += delta;
    }
    grad_check(&mut model, opts.step, |m| Ok(m.masked_loss(&batch, weights)?.total))
}
