use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Gradients, ModelParams};

/// Rescales all gradients together so their global L2 norm is at most
/// `max_norm`. Returns the norm before clipping.
pub fn clip_global_norm(grads: &mut Gradients, max_norm: f64) -> Result<f64> {
    if !(max_norm > 0.0) {
        return Err(Error::arg(format!("max_norm must be positive, got {max_norm}")));
    }
    for (name, t) in grads.tensors() {
        if !t.is_finite() {
            return Err(Error::Numeric(format!("non-finite gradient in tensor {name}")));
        }
    }
    let norm = grads.global_norm();
    if norm > max_norm {
        grads.scale_in_place(max_norm / norm);
    }
    Ok(norm)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Adam moment estimates, shaped like the parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerState {
    pub config: AdamConfig,
    pub first_moment: ModelParams,
    pub second_moment: ModelParams,
    pub step: u64,
}

impl OptimizerState {
    pub fn new(params: &ModelParams, config: AdamConfig) -> Self {
        OptimizerState {
            config,
            first_moment: params.zeros_like(),
            second_moment: params.zeros_like(),
            step: 0,
        }
    }
}

/// One bias-corrected Adam update of `params` in place.
pub fn adam_step(
    state: &mut OptimizerState,
    params: &mut ModelParams,
    grads: &Gradients,
    lr: f64,
) -> Result<()> {
    if !(lr > 0.0) {
        return Err(Error::arg(format!("learning rate must be positive, got {lr}")));
    }
    let AdamConfig {
        beta1,
        beta2,
        epsilon,
    } = state.config;
    state.step += 1;
    let bc1 = 1.0 - beta1.powi(state.step as i32);
    let bc2 = 1.0 - beta2.powi(state.step as i32);

    let g = grads.tensors();
    let m = state.first_moment.tensors_mut();
    let v = state.second_moment.tensors_mut();
    let p = params.tensors_mut();
    if g.len() != p.len() || m.len() != p.len() || v.len() != p.len() {
        return Err(Error::arg("optimizer state does not match parameter layout"));
    }
    for (((gt, mt), vt), pt) in g.into_iter().zip(m).zip(v).zip(p) {
        if gt.1.shape() != pt.1.shape() || mt.1.shape() != pt.1.shape() {
            return Err(Error::Shape {
                op: "adam_step",
                left: pt.1.shape(),
                right: gt.1.shape(),
            });
        }
        let iter = pt
            .1
            .as_mut_slice()
            .iter_mut()
            .zip(gt.1.as_slice())
            .zip(mt.1.as_mut_slice())
            .zip(vt.1.as_mut_slice());
        for (((w, &gi), mi), vi) in iter {
            *mi = beta1 * *mi + (1.0 - beta1) * gi;
            *vi = beta2 * *vi + (1.0 - beta2) * gi * gi;
            let m_hat = *mi / bc1;
            let v_hat = *vi / bc2;
            *w -= lr * m_hat / (v_hat.sqrt() + epsilon);
        }
    }
    Ok(())
}
