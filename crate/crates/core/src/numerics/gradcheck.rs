use serde::Serialize;

use super::matrix::Matrix;
use crate::error::{Error, Result};

/// Outcome of comparing an analytic gradient with central differences.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GradCheckReport {
    pub max_abs_error: f64,
    pub max_rel_error: f64,
    /// `(row, col)` of the coordinate with the largest relative error.
    pub worst_coordinate: (usize, usize),
}

/// Relative error `|a − n| / max(|a|, |n|, 1e-8)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// Central-difference check of `analytic_grad` against `f` at `x`.
pub fn grad_check<F>(mut f: F, x: &Matrix, analytic_grad: &Matrix, eps: f64) -> Result<GradCheckReport>
where
    F: FnMut(&Matrix) -> f64,
{
    if !(eps > 0.0) {
        return Err(Error::arg(format!("eps must be positive, got {eps}")));
    }
    x.same_shape("grad_check", analytic_grad)?;

    let mut probe = x.clone();
    let mut report = GradCheckReport {
        max_abs_error: 0.0,
        max_rel_error: 0.0,
        worst_coordinate: (0, 0),
    };
    for idx in 0..x.len() {
        let orig = x.as_slice()[idx];
        probe.as_mut_slice()[idx] = orig + eps;
        let plus = f(&probe);
        probe.as_mut_slice()[idx] = orig - eps;
        let minus = f(&probe);
        probe.as_mut_slice()[idx] = orig;
        if !plus.is_finite() || !minus.is_finite() {
            return Err(Error::Numeric(format!(
                "non-finite objective at coordinate {idx}: f(x+eps)={plus}, f(x-eps)={minus}"
            )));
        }
        let numeric = (plus - minus) / (2.0 * eps);
        let analytic = analytic_grad.as_slice()[idx];
        let abs = (analytic - numeric).abs();
        let rel = relative_error(analytic, numeric);
        report.max_abs_error = report.max_abs_error.max(abs);
        if rel > report.max_rel_error {
            report.max_rel_error = rel;
            report.worst_coordinate = (idx / x.cols(), idx % x.cols());
        }
    }
    Ok(report)
}
