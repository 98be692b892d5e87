//! Cross-entropy with L1 continuity penalties on the attention sequences.

use serde::{Deserialize, Serialize};

use super::params::Variant;
use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// Probabilities are floored here inside the logarithm.
pub const PROB_FLOOR: f64 = 1e-12;

/// Model variant plus continuity strengths.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    pub variant: Variant,
    /// Temporal continuity strength `λ1`.
    #[serde(default = "default_lambda1")]
    pub lambda1: f64,
    /// Sensor continuity strength `λ2`.
    #[serde(default = "default_lambda2")]
    pub lambda2: f64,
}

fn default_lambda1() -> f64 {
    0.1
}

fn default_lambda2() -> f64 {
    0.5
}

impl LossConfig {
    pub fn new(variant: Variant, lambda1: f64, lambda2: f64) -> Result<Self> {
        let cfg = LossConfig {
            variant,
            lambda1,
            lambda2,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Unregularized loss for `variant`.
    pub fn unregularized(variant: Variant) -> Self {
        LossConfig {
            variant,
            lambda1: 0.0,
            lambda2: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("lambda1", self.lambda1), ("lambda2", self.lambda2)] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Config(format!(
                    "{name} must be finite and non-negative, got {v}"
                )));
            }
        }
        Ok(())
    }
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            variant: Variant::TemporalSensor,
            lambda1: default_lambda1(),
            lambda2: default_lambda2(),
        }
    }
}

/// Sum of absolute differences between consecutive entries, from the second
/// entry on.
pub fn total_variation(seq: &[f64]) -> f64 {
    seq.windows(2).map(|w| (w[1] - w[0]).abs()).sum()
}

/// Row-wise [`total_variation`]: `Σ_{t≥2} ‖row_t − row_{t−1}‖₁`.
pub fn total_variation_rows(rows: &Matrix) -> f64 {
    (1..rows.rows())
        .map(|t| {
            rows.row(t)
                .iter()
                .zip(rows.row(t - 1))
                .map(|(a, b)| (a - b).abs())
                .sum::<f64>()
        })
        .sum()
}

#[inline]
fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Adds `scale · ∂TV/∂seq` to `grad`, with `sign(0) = 0`.
pub fn total_variation_subgradient(seq: &[f64], scale: f64, grad: &mut [f64]) {
    for t in 1..seq.len() {
        let s = scale * sign(seq[t] - seq[t - 1]);
        grad[t] += s;
        grad[t - 1] -= s;
    }
}

pub fn total_variation_rows_subgradient(rows: &Matrix, scale: f64, grad: &mut Matrix) {
    let m = rows.cols();
    for t in 1..rows.rows() {
        for j in 0..m {
            let s = scale * sign(rows.get(t, j) - rows.get(t - 1, j));
            grad.set(t, j, grad.get(t, j) + s);
            grad.set(t - 1, j, grad.get(t - 1, j) - s);
        }
    }
}

/// `−ln(max(p_class, PROB_FLOOR))`
pub fn cross_entropy(probs: &[f64], class: usize) -> Result<f64> {
    let p = probs.get(class).ok_or_else(|| {
        Error::arg(format!(
            "class {class} out of range for {} probabilities",
            probs.len()
        ))
    })?;
    Ok(-p.max(PROB_FLOOR).ln())
}

/// The three loss terms and their sum.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct LossBreakdown {
    pub cross_entropy: f64,
    /// `λ1 · TV(α)`, zero unless the variant has temporal attention.
    pub temporal_penalty: f64,
    /// `λ2 · Σ_t ‖β_t − β_{t−1}‖₁`, zero unless the variant has sensor attention.
    pub sensor_penalty: f64,
    pub total: f64,
}
