//! Evaluation statistics: Mann–Whitney AUC, percentile-bootstrap confidence
//! intervals and the paired two-tailed bootstrap test.

mod auc;
mod bootstrap;

pub use auc::{auc, auc_pairwise, auc_slices, ScoreSet};
pub use bootstrap::{bootstrap_ci, bootstrap_pvalue, percentile, BootstrapConfig, BootstrapResult};

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// `0.917 (0.857-0.966)`.
pub fn format_ci(point: f64, low: f64, high: f64) -> String {
    format!("{point:.3} ({low:.3}-{high:.3})")
}

/// `0.816 ± 0.048`.
pub fn format_mean_std(mean: f64, std: f64) -> String {
    format!("{mean:.3} \u{b1} {std:.3}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formatting() {
        assert_eq!(format_ci(0.9171, 0.8566, 0.9664), "0.917 (0.857-0.966)");
        assert_eq!(format_mean_std(0.816, 0.048), "0.816 ± 0.048");
    }

    #[test]
    fn population_std() {
        let (m, s) = mean_std(&[1.0, 2.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s - (2.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(mean_std(&[0.7; 5]).1, 0.0);
    }
}
