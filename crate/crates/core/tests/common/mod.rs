//! Oracles and fixtures shared by the integration tests.
#![allow(dead_code)]

use m3net_core::model::{AttentionPool, ImageBag};
use m3net_core::seed::rng_from_seed;
use m3net_core::{M3Net, ModelConfig, SubjectFeatures};
use rand::seq::SliceRandom;
use rand::Rng;

/// Pair-count AUC: P(score+ > score-) + 0.5 P(tie), by explicit enumeration
/// over all positive/negative pairs, in integer half-units.
pub fn pair_count_auc(labels: &[u8], scores: &[f64]) -> Option<f64> {
    let mut half_units: u64 = 0;
    let (mut pos, mut neg) = (0u64, 0u64);
    for (i, &li) in labels.iter().enumerate() {
        if li == 1 {
            pos += 1;
        } else {
            neg += 1;
            continue;
        }
        for (j, &lj) in labels.iter().enumerate() {
            if lj == 0 {
                half_units += match scores[i].partial_cmp(&scores[j]).unwrap() {
                    std::cmp::Ordering::Greater => 2,
                    std::cmp::Ordering::Equal => 1,
                    std::cmp::Ordering::Less => 0,
                };
            }
        }
    }
    (pos > 0 && neg > 0).then(|| half_units as f64 / (2 * pos * neg) as f64)
}

/// Random scores on a coarse grid (forcing ties) with random labels.
pub fn tied_instance(rng: &mut impl Rng, n: usize) -> (Vec<u8>, Vec<f64>) {
    loop {
        let labels: Vec<u8> = (0..n).map(|_| rng.random_range(0..2)).collect();
        if labels.contains(&0) && labels.contains(&1) {
            let grid = rng.random_range(2..20) as f64;
            let scores = (0..n).map(|_| (rng.random::<f64>() * grid).floor() / grid).collect();
            return (labels, scores);
        }
    }
}

fn random_bag(rng: &mut impl Rng, width: usize, capacity: usize) -> (Vec<Vec<f64>>, ImageBag) {
    let count = rng.random_range(1..=capacity);
    let rows: Vec<Vec<f64>> = (0..count)
        .map(|_| (0..width).map(|_| rng.random_range(-3.0..3.0)).collect())
        .collect();
    let bag = ImageBag::padded(&rows, width, capacity).unwrap();
    (rows, bag)
}

/// Checks simplex, zero-on-padding, permutation equivariance (weights,
/// pooled feature and p1) and padding invariance on `bags` random bags
/// with default model widths. Returns the first violation.
pub fn amil_property_violation(bags: usize, seed: u64, tol: f64) -> Option<String> {
    let config = ModelConfig::default();
    let mut rng = rng_from_seed(seed);
    for b in 0..bags {
        let model = M3Net::new(config.clone(), &mut rng).unwrap();
        let pool: &AttentionPool = &model.params.attention;
        let (rows, bag) = random_bag(&mut rng, config.image_feature_width, config.bag_capacity);
        let (pooled, weights) = pool.apply(&bag).unwrap();
        let real = rows.len();

        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > tol || weights.iter().any(|w| *w < 0.0) {
            return Some(format!("bag {b}: weights {weights:?} not on the simplex"));
        }
        if weights[real..].iter().any(|w| *w != 0.0) {
            return Some(format!("bag {b}: padded rows got weight {:?}", &weights[real..]));
        }

        let mut perm: Vec<usize> = (0..real).collect();
        perm.shuffle(&mut rng);
        let permuted: Vec<Vec<f64>> = perm.iter().map(|&i| rows[i].clone()).collect();
        let pbag = ImageBag::padded(&permuted, config.image_feature_width, config.bag_capacity).unwrap();
        let (ppooled, pweights) = pool.apply(&pbag).unwrap();
        for (k, &i) in perm.iter().enumerate() {
            if (pweights[k] - weights[i]).abs() > tol {
                return Some(format!("bag {b}: permuted weight {k} differs"));
            }
        }
        if pooled.iter().zip(&ppooled).any(|(a, c)| (a - c).abs() > tol) {
            return Some(format!("bag {b}: pooled feature not permutation invariant"));
        }
        let p1 = |bag: ImageBag| {
            model
                .forward(&SubjectFeatures { image: Some(bag), biomarkers: None })
                .unwrap()
                .p1
                .unwrap()
        };
        if (p1(bag.clone()) - p1(pbag)).abs() > tol {
            return Some(format!("bag {b}: p1 not permutation invariant"));
        }

        let wide = ImageBag::padded(&rows, config.image_feature_width, config.bag_capacity + 3).unwrap();
        let (wpooled, wweights) = pool.apply(&wide).unwrap();
        if wpooled != pooled || wweights[..config.bag_capacity] != weights[..] || wweights[config.bag_capacity..].iter().any(|w| *w != 0.0) {
            return Some(format!("bag {b}: extra padding changed the output"));
        }
        if p1(wide) != p1(bag) {
            return Some(format!("bag {b}: extra padding changed p1"));
        }
    }
    None
}
