use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{auc_slices, ScoreSet};
use crate::error::{Error, Result};
use crate::seed::{derive_seed, rng_from_seed, STREAM_BOOTSTRAP};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct BootstrapConfig {
    pub n_resamples: usize,
    pub seed: u64,
    /// Worker threads for the resample loop; results do not depend on it.
    pub jobs: usize,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            n_resamples: 2000,
            seed: 0,
            jobs: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapResult {
    pub point: f64,
    pub n_resamples: usize,
    pub seed: u64,
    pub ci_low: f64,
    pub ci_high: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_two_tailed: Option<f64>,
}

impl BootstrapResult {
    pub fn formatted(&self) -> String {
        super::format_ci(self.point, self.ci_low, self.ci_high)
    }
}

/// Linear-interpolation percentile of sorted data, `q` in `[0, 100]`.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q / 100.0 * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Subject indices of resample `r`; drawn again until both classes appear.
fn resample_indices(labels: &[u8], seed: u64, r: usize) -> Vec<usize> {
    let n = labels.len();
    let mut rng = rng_from_seed(derive_seed(seed, r as u64));
    loop {
        let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
        let pos = idx.iter().filter(|&&i| labels[i] == 1).count();
        if pos > 0 && pos < n {
            return idx;
        }
    }
}

fn run_resamples<T, F>(cfg: &BootstrapConfig, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    if cfg.n_resamples == 0 {
        return Err(Error::InvalidConfig("n_resamples must be positive".into()));
    }
    if cfg.jobs <= 1 {
        return (0..cfg.n_resamples).map(f).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    pool.install(|| (0..cfg.n_resamples).into_par_iter().map(f).collect())
}

fn stream_seed(seed: u64) -> u64 {
    derive_seed(seed, STREAM_BOOTSTRAP)
}

/// Percentile bootstrap 95% CI of the AUC over subject resamples.
pub fn bootstrap_ci(set: &ScoreSet, cfg: &BootstrapConfig) -> Result<BootstrapResult> {
    let point = auc_slices(&set.labels, &set.scores)?;
    let seed = stream_seed(cfg.seed);
    let mut aucs = run_resamples(cfg, |r| {
        let idx = resample_indices(&set.labels, seed, r);
        let labels: Vec<u8> = idx.iter().map(|&i| set.labels[i]).collect();
        let scores: Vec<f64> = idx.iter().map(|&i| set.scores[i]).collect();
        auc_slices(&labels, &scores)
    })?;
    aucs.sort_by(f64::total_cmp);
    Ok(BootstrapResult {
        point,
        n_resamples: cfg.n_resamples,
        seed: cfg.seed,
        ci_low: percentile(&aucs, 2.5),
        ci_high: percentile(&aucs, 97.5),
        p_two_tailed: None,
    })
}

/// Paired two-tailed bootstrap test of `AUC(a) - AUC(b)`:
/// `p = 2 min(#{Δ ≤ 0}, #{Δ ≥ 0}) / n`, clipped to `[1/n, 1]`.
pub fn bootstrap_pvalue(a: &ScoreSet, b: &ScoreSet, cfg: &BootstrapConfig) -> Result<f64> {
    if a.ids != b.ids || a.labels != b.labels {
        return Err(Error::Misaligned(
            "paired comparison needs identical subject ids and labels in the same order".into(),
        ));
    }
    auc_slices(&a.labels, &a.scores)?;
    let seed = stream_seed(cfg.seed);
    let deltas = run_resamples(cfg, |r| {
        let idx = resample_indices(&a.labels, seed, r);
        let labels: Vec<u8> = idx.iter().map(|&i| a.labels[i]).collect();
        let sa: Vec<f64> = idx.iter().map(|&i| a.scores[i]).collect();
        let sb: Vec<f64> = idx.iter().map(|&i| b.scores[i]).collect();
        Ok(auc_slices(&labels, &sa)? - auc_slices(&labels, &sb)?)
    })?;
    let n = cfg.n_resamples as f64;
    let le = deltas.iter().filter(|d| **d <= 0.0).count();
    let ge = deltas.iter().filter(|d| **d >= 0.0).count();
    let p = 2.0 * le.min(ge) as f64 / n;
    Ok(p.clamp(1.0 / n, 1.0))
}
