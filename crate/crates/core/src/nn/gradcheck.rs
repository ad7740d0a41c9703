//! Central-difference gradient checker.
//!
//! The error of a parameter tensor is `‖a - n‖ / max(‖a‖, ‖n‖, 1e-8)` over
//! its analytic (`a`) and numeric (`n`) gradients; the report carries the
//! maximum over tensors. The largest single-entry error is kept as a
//! diagnostic: entries far below the tensor's scale sit at the resolution
//! limit of double-precision differences (about `ulp(loss) / 2h`).

use super::Parameterized;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    /// Maximum over tensors of the norm-wise relative error.
    pub max_relative_error: f64,
    /// Index of the tensor attaining it.
    pub worst_tensor: usize,
    /// Per-tensor norm-wise relative errors.
    pub tensor_errors: Vec<f64>,
    /// Largest entry-wise relative error, and where: (tensor, entry).
    pub max_entry_error: f64,
    pub worst_entry: (usize, usize),
    pub checked: usize,
}

/// `|a - n| / max(|a|, |n|, 1e-8)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

fn norm(v: impl Iterator<Item = f64>) -> f64 {
    v.map(|x| x * x).sum::<f64>().sqrt()
}

/// Compares the gradients currently stored in `model` against central
/// differences of `loss` with step `h`. The caller must have populated the
/// gradients for the same point. Parameter values are restored exactly.
pub fn grad_check<M, F>(model: &mut M, h: f64, mut loss: F) -> Result<GradCheckReport>
where
    M: Parameterized,
    F: FnMut(&M) -> Result<f64>,
{
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::InvalidConfig(format!("finite-difference step {h} must be positive")));
    }
    let analytic: Vec<Vec<f64>> = model.params().iter().map(|p| p.grad().to_vec()).collect();
    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        worst_tensor: 0,
        tensor_errors: Vec::with_capacity(analytic.len()),
        max_entry_error: 0.0,
        worst_entry: (0, 0),
        checked: 0,
    };
    for (t, grads) in analytic.iter().enumerate() {
        let mut numeric = Vec::with_capacity(grads.len());
        for (i, &a) in grads.iter().enumerate() {
            let orig = model.params()[t].values()[i];
            model.params_mut()[t].values_mut()[i] = orig + h;
            let plus = loss(model);
            model.params_mut()[t].values_mut()[i] = orig - h;
            let minus = loss(model);
            model.params_mut()[t].values_mut()[i] = orig;
            let (plus, minus) = (plus?, minus?);
            if !(plus.is_finite() && minus.is_finite()) {
                return Err(Error::NonFinite("gradient-check loss"));
            }
            let n = (plus - minus) / (2.0 * h);
            let e = relative_error(a, n);
            if e > report.max_entry_error {
                report.max_entry_error = e;
                report.worst_entry = (t, i);
            }
            numeric.push(n);
        }
        let diff = norm(grads.iter().zip(&numeric).map(|(a, n)| a - n));
        let scale = norm(grads.iter().copied())
            .max(norm(numeric.iter().copied()))
            .max(1e-8);
        let err = diff / scale;
        if err > report.max_relative_error {
            report.max_relative_error = err;
            report.worst_tensor = t;
        }
        report.tensor_errors.push(err);
        report.checked += grads.len();
    }
    Ok(report)
}
