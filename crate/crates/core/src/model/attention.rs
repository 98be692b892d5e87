//! Temporal attention over hidden states and sensor-modality attention over
//! inputs, each with its reverse pass.

use super::params::{SensorAttentionParams, TemporalAttentionParams};
use crate::error::{Error, Result};
use crate::numerics::{dot, outer_acc, softmax_unchecked, softmax_vjp, vec_mat_acc, vec_mat_t_acc, Matrix};

/// Result of attending over a `T × H` hidden-state sequence.
#[derive(Clone, Debug, PartialEq)]
pub struct TemporalContext {
    /// Attention weights, one per timestep.
    pub alpha: Vec<f64>,
    /// `H = Σ_t α_t h_t`.
    pub context: Vec<f64>,
    /// `h_T W_α`, reused by the reverse pass.
    pub(crate) projected_query: Vec<f64>,
}

/// Weighted sum of hidden states with `α = softmax_t(h_T W_α h_tᵀ)`.
///
/// The query is the final hidden state and the sum runs over every step,
/// including `T` itself.
pub fn temporal_attention(h: &Matrix, p: &TemporalAttentionParams) -> Result<TemporalContext> {
    if h.is_empty() {
        return Err(Error::arg("temporal attention over an empty sequence"));
    }
    if p.w_alpha.shape() != (h.cols(), h.cols()) {
        return Err(Error::Shape {
            op: "temporal_attention",
            left: h.shape(),
            right: p.w_alpha.shape(),
        });
    }
    let query = h.row(h.rows() - 1);
    let mut projected_query = vec![0.0; h.cols()];
    vec_mat_acc(&mut projected_query, query, &p.w_alpha);
    let scores: Vec<f64> = (0..h.rows())
        .map(|t| dot(&projected_query, h.row(t)))
        .collect();
    let alpha = softmax_unchecked(&scores);
    let context = weighted_sum(h, &alpha);
    Ok(TemporalContext {
        alpha,
        context,
        projected_query,
    })
}

pub(crate) fn weighted_sum(h: &Matrix, weights: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; h.cols()];
    for (t, &w) in weights.iter().enumerate() {
        for (o, v) in out.iter_mut().zip(h.row(t)) {
            *o += w * v;
        }
    }
    out
}

/// Reverse pass of [`temporal_attention`].
///
/// `d_context` is the gradient on `H`; `d_alpha_extra` is any gradient
/// placed directly on `α` (the continuity penalty). Returns `(dW_α, dh)`.
pub fn temporal_attention_backward(
    h: &Matrix,
    p: &TemporalAttentionParams,
    ctx: &TemporalContext,
    d_context: &[f64],
    d_alpha_extra: &[f64],
) -> (Matrix, Matrix) {
    let (t_len, hid) = h.shape();
    let mut dh = Matrix::zeros(t_len, hid);
    let d_alpha: Vec<f64> = (0..t_len)
        .map(|t| dot(d_context, h.row(t)) + d_alpha_extra[t])
        .collect();
    for t in 0..t_len {
        let a = ctx.alpha[t];
        for (d, g) in dh.row_mut(t).iter_mut().zip(d_context) {
            *d += a * g;
        }
    }
    let d_scores = softmax_vjp(&ctx.alpha, &d_alpha);

    // score_t = q W_α h_tᵀ with q = h_T.
    let mut d_proj = vec![0.0; hid];
    for (t, &ds) in d_scores.iter().enumerate() {
        for (dp, v) in d_proj.iter_mut().zip(h.row(t)) {
            *dp += ds * v;
        }
        for (d, q) in dh.row_mut(t).iter_mut().zip(&ctx.projected_query) {
            *d += ds * q;
        }
    }
    let query = h.row(t_len - 1);
    let mut d_w = Matrix::zeros(hid, hid);
    outer_acc(&mut d_w, query, &d_proj);
    vec_mat_t_acc(dh.row_mut(t_len - 1), &d_proj, &p.w_alpha);
    (d_w, dh)
}

fn check_probability_vector(v: &[f64], expect_len: usize) -> Result<()> {
    if v.len() != expect_len {
        return Err(Error::arg(format!(
            "expected {expect_len} modality weights, got {}",
            v.len()
        )));
    }
    let sum: f64 = v.iter().sum();
    if v.iter().any(|&b| !(0.0..=1.0).contains(&b)) || (sum - 1.0).abs() > 1e-9 {
        return Err(Error::arg(format!(
            "previous modality weights are not a probability vector (sum {sum})"
        )));
    }
    Ok(())
}

fn energy_step(
    p: &SensorAttentionParams,
    beta_prev: &[f64],
    x_t: &[f64],
    hidden: &mut [f64],
) -> Vec<f64> {
    // hidden = tanh(W_β β_{t−1} + W_x x_t), E = V_e · hidden
    vec_mat_t_acc(hidden, beta_prev, &p.w_beta);
    vec_mat_t_acc(hidden, x_t, &p.w_x);
    hidden.iter_mut().for_each(|v| *v = v.tanh());
    let mut energy = vec![0.0; p.modalities()];
    vec_mat_t_acc(&mut energy, hidden, &p.v_e);
    energy
}

/// `x'_t[d] = β_t[modality(d)] · x_t[d]`
pub(crate) fn reweight(modality_map: &[usize], beta: &[f64], x_t: &[f64], out: &mut [f64]) {
    for ((o, &x), &m) in out.iter_mut().zip(x_t).zip(modality_map) {
        *o = beta[m] * x;
    }
}

/// One step of sensor attention. Returns `(β_t, x'_t)`.
pub fn sensor_attention_step(
    p: &SensorAttentionParams,
    beta_prev: &[f64],
    x_t: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    check_probability_vector(beta_prev, p.modalities())?;
    if x_t.len() != p.input_size() {
        return Err(Error::Shape {
            op: "sensor_attention_step",
            left: (1, p.input_size()),
            right: (1, x_t.len()),
        });
    }
    let mut hidden = vec![0.0; p.w_beta.rows()];
    let beta = softmax_unchecked(&energy_step(p, beta_prev, x_t, &mut hidden));
    let mut x_prime = vec![0.0; x_t.len()];
    reweight(&p.modality_map, &beta, x_t, &mut x_prime);
    Ok((beta, x_prime))
}

/// Sensor attention unrolled over a whole window from a uniform `β_0`.
#[derive(Clone, Debug, PartialEq)]
pub struct SensorTrace {
    /// `β_1 … β_T` (`T × M`).
    pub beta: Matrix,
    /// Re-weighted inputs `x'_t` (`T × D`).
    pub reweighted: Matrix,
    /// `tanh` activations of the energy network (`T × k`).
    pub(crate) hidden: Matrix,
}

pub fn sensor_attention_forward(p: &SensorAttentionParams, x: &Matrix) -> Result<SensorTrace> {
    if x.cols() != p.input_size() {
        return Err(Error::Shape {
            op: "sensor_attention_forward",
            left: x.shape(),
            right: p.w_x.shape(),
        });
    }
    let (t_len, m, k) = (x.rows(), p.modalities(), p.w_beta.rows());
    let mut trace = SensorTrace {
        beta: Matrix::zeros(t_len, m),
        reweighted: Matrix::zeros(t_len, x.cols()),
        hidden: Matrix::zeros(t_len, k),
    };
    let mut beta_prev = vec![1.0 / m as f64; m];
    for t in 0..t_len {
        let energy = energy_step(p, &beta_prev, x.row(t), trace.hidden.row_mut(t));
        let beta = softmax_unchecked(&energy);
        reweight(&p.modality_map, &beta, x.row(t), trace.reweighted.row_mut(t));
        trace.beta.row_mut(t).copy_from_slice(&beta);
        beta_prev = beta;
    }
    Ok(trace)
}

/// Reverse pass through the `β` recurrence.
///
/// `d_reweighted` is the gradient on `x'` (`T × D`); `d_beta_extra` is any
/// gradient placed directly on `β` (`T × M`, the continuity penalty).
pub fn sensor_attention_backward(
    p: &SensorAttentionParams,
    x: &Matrix,
    trace: &SensorTrace,
    d_reweighted: &Matrix,
    d_beta_extra: &Matrix,
) -> SensorAttentionParams {
    let (t_len, m, k) = (x.rows(), p.modalities(), p.w_beta.rows());
    let mut g = SensorAttentionParams::zeros(x.cols(), m, k, p.modality_map.clone());
    let uniform = vec![1.0 / m as f64; m];
    let mut d_beta_carry = vec![0.0; m];
    let mut d_hidden = vec![0.0; k];
    for t in (0..t_len).rev() {
        let beta = trace.beta.row(t);
        let mut d_beta: Vec<f64> = d_beta_extra
            .row(t)
            .iter()
            .zip(&d_beta_carry)
            .map(|(a, b)| a + b)
            .collect();
        for ((&dxp, &xv), &mi) in d_reweighted.row(t).iter().zip(x.row(t)).zip(&p.modality_map) {
            d_beta[mi] += dxp * xv;
        }
        let d_energy = softmax_vjp(beta, &d_beta);
        let hidden = trace.hidden.row(t);
        outer_acc(&mut g.v_e, &d_energy, hidden);
        d_hidden.fill(0.0);
        vec_mat_acc(&mut d_hidden, &d_energy, &p.v_e);
        for (d, z) in d_hidden.iter_mut().zip(hidden) {
            *d *= 1.0 - z * z;
        }
        let beta_prev = if t > 0 { trace.beta.row(t - 1) } else { &uniform[..] };
        outer_acc(&mut g.w_beta, &d_hidden, beta_prev);
        outer_acc(&mut g.w_x, &d_hidden, x.row(t));
        d_beta_carry.fill(0.0);
        vec_mat_acc(&mut d_beta_carry, &d_hidden, &p.w_beta);
    }
    g
}
