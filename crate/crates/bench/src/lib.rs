//! Fixtures shared by the benchmarks.

use m3net_core::data::{generate_synthetic_cohort, SynthConfig};
use m3net_core::model::{LossWeights, SubjectFeatures};
use m3net_core::seed::rng_from_seed;
use m3net_core::stats::ScoreSet;
use m3net_core::{M3Net, ModelConfig};
use rand::Rng;

/// A default-size model and `n` normalized synthetic subjects with labels.
pub fn model_and_batch(config: ModelConfig, n: usize, seed: u64) -> (M3Net, Vec<(SubjectFeatures, u8)>) {
    let model = M3Net::new(config, &mut rng_from_seed(seed)).expect("valid config");
    let cohort = generate_synthetic_cohort(&SynthConfig {
        n,
        seed,
        ..SynthConfig::default()
    })
    .expect("valid synth config");
    let refs: Vec<_> = cohort.iter().collect();
    let stats = m3net_core::data::compute_normalization(&refs).expect("non-empty");
    let batch = cohort
        .iter()
        .map(|r| (stats.apply(r).expect("stats cover both modalities"), r.label))
        .collect();
    (model, batch)
}

pub fn loss_weights() -> LossWeights {
    LossWeights::default()
}

/// `n` scores with ties and balanced labels.
pub fn score_set(n: usize, seed: u64) -> ScoreSet {
    let mut rng = rng_from_seed(seed);
    let labels: Vec<u8> = (0..n).map(|i| (i % 2) as u8).collect();
    let scores = labels
        .iter()
        .map(|&l| (f64::from(l) * 0.3 + rng.random::<f64>() * 100.0).round() / 100.0)
        .collect();
    ScoreSet::anonymous(labels, scores).expect("aligned")
}
