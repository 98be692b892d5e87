//! Whole-model forward and reverse passes for every variant.

use serde::Serialize;

use super::attention::{
    sensor_attention_backward, sensor_attention_forward, temporal_attention,
    temporal_attention_backward, weighted_sum, SensorTrace, TemporalContext,
};
use super::loss::{
    cross_entropy, total_variation, total_variation_rows, total_variation_rows_subgradient,
    total_variation_subgradient, LossBreakdown, LossConfig, PROB_FLOOR,
};
use super::lstm::{lstm_backward, lstm_forward, LstmStates};
use super::params::{Gradients, ModelParams};
use crate::error::{Error, Result};
use crate::numerics::{outer_acc, softmax_unchecked, vec_mat_acc, vec_mat_t_acc, Matrix};

/// Attention weights and context of one forward pass.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AttentionTrace {
    /// Temporal weights; one-hot at the final step without temporal attention.
    pub alpha: Vec<f64>,
    /// Modality weights `T × M`; uniform rows without sensor attention.
    pub beta: Vec<Vec<f64>>,
    /// Sequence representation fed to the classifier.
    pub context: Vec<f64>,
}

/// Intermediate values needed by [`backward`].
#[derive(Clone, Debug)]
pub struct ForwardCache {
    input_shape: (usize, usize),
    sensor: Option<SensorTrace>,
    layer1: LstmStates,
    layer2: Option<LstmStates>,
    temporal: Option<TemporalContext>,
    alpha_overridden: bool,
}

impl ForwardCache {
    /// Inputs actually fed to the first LSTM layer (`x'` under sensor attention).
    pub fn lstm_input<'a>(&'a self, x: &'a Matrix) -> &'a Matrix {
        self.sensor.as_ref().map(|s| &s.reweighted).unwrap_or(x)
    }

    /// Hidden states of the topmost layer.
    pub fn top_hidden(&self) -> &Matrix {
        &self.layer2.as_ref().unwrap_or(&self.layer1).h
    }
}

#[derive(Clone, Debug)]
pub struct ForwardPass {
    pub probs: Vec<f64>,
    pub trace: AttentionTrace,
    pub cache: ForwardCache,
}

impl ForwardPass {
    pub fn predicted_class(&self) -> usize {
        argmax(&self.probs)
    }
}

pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &p) in v.iter().enumerate() {
        if p > v[best] {
            best = i;
        }
    }
    best
}

fn check_components(params: &ModelParams, cfg: &LossConfig) -> Result<()> {
    if cfg.variant.has_temporal() && params.temporal.is_none() {
        return Err(Error::Config(format!(
            "variant {} needs temporal attention parameters",
            cfg.variant
        )));
    }
    if cfg.variant.has_sensor() && params.sensor.is_none() {
        return Err(Error::Config(format!(
            "variant {} needs sensor attention parameters",
            cfg.variant
        )));
    }
    Ok(())
}

/// Class probabilities and attention trace for one window `x` (`T × D`).
pub fn forward(params: &ModelParams, cfg: &LossConfig, x: &Matrix) -> Result<ForwardPass> {
    forward_impl(params, cfg, x, None)
}

/// Like [`forward`] but with the temporal weights replaced by `alpha`.
///
/// Forced weights bypass the scoring network; the result cannot be passed to
/// [`backward`].
pub fn forward_with_alpha(
    params: &ModelParams,
    cfg: &LossConfig,
    x: &Matrix,
    alpha: &[f64],
) -> Result<ForwardPass> {
    if alpha.len() != x.rows() {
        return Err(Error::arg(format!(
            "{} forced attention weights for {} timesteps",
            alpha.len(),
            x.rows()
        )));
    }
    forward_impl(params, cfg, x, Some(alpha))
}

fn forward_impl(
    params: &ModelParams,
    cfg: &LossConfig,
    x: &Matrix,
    forced_alpha: Option<&[f64]>,
) -> Result<ForwardPass> {
    check_components(params, cfg)?;
    if x.is_empty() {
        return Err(Error::arg("empty input window"));
    }
    if x.cols() != params.dims.input {
        return Err(Error::Shape {
            op: "forward",
            left: x.shape(),
            right: params.lstm.w_xi.shape(),
        });
    }
    let t_len = x.rows();
    let m = params.dims.modalities;

    let sensor = match (&params.sensor, cfg.variant.has_sensor()) {
        (Some(p), true) => Some(sensor_attention_forward(p, x)?),
        _ => None,
    };
    let lstm_in = sensor.as_ref().map(|s| &s.reweighted).unwrap_or(x);
    let layer1 = lstm_forward(&params.lstm, lstm_in)?;
    let layer2 = match &params.stacked {
        Some(p) => Some(lstm_forward(p, &layer1.h)?),
        None => None,
    };
    let top = &layer2.as_ref().unwrap_or(&layer1).h;

    let (alpha, context, temporal) = match (forced_alpha, &params.temporal, cfg.variant.has_temporal()) {
        (Some(a), _, _) => (a.to_vec(), weighted_sum(top, a), None),
        (None, Some(p), true) => {
            let ctx = temporal_attention(top, p)?;
            (ctx.alpha.clone(), ctx.context.clone(), Some(ctx))
        }
        _ => {
            let mut a = vec![0.0; t_len];
            a[t_len - 1] = 1.0;
            (a, top.row(t_len - 1).to_vec(), None)
        }
    };

    let mut logits = params.head.b_y.as_slice().to_vec();
    vec_mat_acc(&mut logits, &context, &params.head.w_y);
    let probs = softmax_unchecked(&logits);
    if probs.iter().any(|p| !p.is_finite()) {
        return Err(Error::Numeric("non-finite class probabilities".into()));
    }

    let beta = match &sensor {
        Some(s) => (0..t_len).map(|t| s.beta.row(t).to_vec()).collect(),
        None => vec![vec![1.0 / m as f64; m]; t_len],
    };
    Ok(ForwardPass {
        probs,
        trace: AttentionTrace {
            alpha,
            beta,
            context,
        },
        cache: ForwardCache {
            input_shape: x.shape(),
            sensor,
            layer1,
            layer2,
            temporal,
            alpha_overridden: forced_alpha.is_some(),
        },
    })
}

/// Cross-entropy plus the continuity penalties the variant enables.
pub fn loss(probs: &[f64], class: usize, trace: &AttentionTrace, cfg: &LossConfig) -> Result<LossBreakdown> {
    let ce = cross_entropy(probs, class)?;
    let temporal_penalty = if cfg.variant.has_temporal() {
        cfg.lambda1 * total_variation(&trace.alpha)
    } else {
        0.0
    };
    let sensor_penalty = if cfg.variant.has_sensor() {
        let rows = beta_matrix(&trace.beta)?;
        cfg.lambda2 * total_variation_rows(&rows)
    } else {
        0.0
    };
    Ok(LossBreakdown {
        cross_entropy: ce,
        temporal_penalty,
        sensor_penalty,
        total: ce + temporal_penalty + sensor_penalty,
    })
}

fn beta_matrix(beta: &[Vec<f64>]) -> Result<Matrix> {
    Matrix::from_rows(beta)
}

/// Exact gradients of [`loss`] w.r.t. every tensor in `params`.
///
/// Tensors not used by `cfg.variant` receive zero gradients.
pub fn backward(
    params: &ModelParams,
    cfg: &LossConfig,
    x: &Matrix,
    class: usize,
    pass: &ForwardPass,
) -> Result<Gradients> {
    let cache = &pass.cache;
    if cache.input_shape != x.shape() || cache.alpha_overridden {
        return Err(Error::arg("forward cache does not belong to this input"));
    }
    if class >= params.dims.classes {
        return Err(Error::arg(format!(
            "class {class} out of range for {} classes",
            params.dims.classes
        )));
    }
    check_components(params, cfg)?;
    let t_len = x.rows();
    let hid = params.dims.hidden;
    let mut g = params.zeros_like();

    // Softmax + cross-entropy; the floor makes the loss flat below it.
    let mut d_logits = vec![0.0; pass.probs.len()];
    if pass.probs[class] >= PROB_FLOOR {
        d_logits.copy_from_slice(&pass.probs);
        d_logits[class] -= 1.0;
    }
    let context = &pass.trace.context;
    outer_acc(&mut g.head.w_y, context, &d_logits);
    g.head
        .b_y
        .as_mut_slice()
        .iter_mut()
        .zip(&d_logits)
        .for_each(|(b, d)| *b += d);
    let mut d_context = vec![0.0; hid];
    vec_mat_t_acc(&mut d_context, &d_logits, &params.head.w_y);

    let top = cache.top_hidden();
    let d_top = match (&cache.temporal, &params.temporal) {
        (Some(ctx), Some(p)) => {
            let mut d_alpha = vec![0.0; t_len];
            total_variation_subgradient(&ctx.alpha, cfg.lambda1, &mut d_alpha);
            let (dw, dh) = temporal_attention_backward(top, p, ctx, &d_context, &d_alpha);
            g.temporal.as_mut().expect("gradient mirrors params").w_alpha = dw;
            dh
        }
        _ => {
            let mut dh = Matrix::zeros(t_len, hid);
            dh.row_mut(t_len - 1).copy_from_slice(&d_context);
            dh
        }
    };

    let d_layer1_h = match (&cache.layer2, &params.stacked) {
        (Some(states), Some(p)) => {
            let (gp, dx) = lstm_backward(p, &cache.layer1.h, states, &d_top)?;
            g.stacked = Some(gp);
            dx
        }
        _ => d_top,
    };
    let lstm_in = cache.lstm_input(x);
    let (g_lstm, d_in) = lstm_backward(&params.lstm, lstm_in, &cache.layer1, &d_layer1_h)?;
    g.lstm = g_lstm;

    if let (Some(trace), Some(p)) = (&cache.sensor, &params.sensor) {
        let mut d_beta = Matrix::zeros(t_len, p.modalities());
        total_variation_rows_subgradient(&trace.beta, cfg.lambda2, &mut d_beta);
        g.sensor = Some(sensor_attention_backward(p, x, trace, &d_in, &d_beta));
    }
    Ok(g)
}

/// Forward, loss and backward for one labelled window.
pub fn loss_and_gradients(
    params: &ModelParams,
    cfg: &LossConfig,
    x: &Matrix,
    class: usize,
) -> Result<(LossBreakdown, Gradients, ForwardPass)> {
    let pass = forward(params, cfg, x)?;
    let l = loss(&pass.probs, class, &pass.trace, cfg)?;
    let g = backward(params, cfg, x, class, &pass)?;
    Ok((l, g, pass))
}

/// Scalar loss only, for finite-difference checks.
pub fn loss_value(params: &ModelParams, cfg: &LossConfig, x: &Matrix, class: usize) -> Result<f64> {
    let pass = forward(params, cfg, x)?;
    Ok(loss(&pass.probs, class, &pass.trace, cfg)?.total)
}
