use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::init::init_params;
use super::optim::{adam_step, clip_global_norm, AdamConfig, OptimizerState};
use crate::data::{SequenceWindow, WindowSet};
use crate::error::{Error, Result};
use crate::metrics::{ConfusionMatrix, EvalReport};
use crate::model::{forward, loss_and_gradients, AttentionTrace, Gradients, LossConfig, ModelDims, ModelParams};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub hidden_size: usize,
    /// Width `k` of the sensor-attention energy network; `M` when unset.
    pub sensor_hidden: Option<usize>,
    /// Adds a second LSTM layer.
    pub stacked: bool,
    pub cell_bias: bool,
    pub learning_rate: f64,
    pub max_grad_norm: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without validation improvement tolerated before stopping.
    pub patience: usize,
    pub seed: u64,
    pub loss: LossConfig,
    pub adam: AdamConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            hidden_size: 128,
            sensor_hidden: None,
            stacked: false,
            cell_bias: false,
            learning_rate: 0.05,
            max_grad_norm: 1.0,
            batch_size: 64,
            max_epochs: 30,
            patience: 5,
            seed: 0,
            loss: LossConfig::default(),
            adam: AdamConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_size == 0 || self.batch_size == 0 || self.max_epochs == 0 {
            return Err(Error::Config(
                "hidden_size, batch_size and max_epochs must be positive".into(),
            ));
        }
        if self.sensor_hidden == Some(0) {
            return Err(Error::Config("sensor_hidden must be positive".into()));
        }
        for (name, v) in [
            ("learning_rate", self.learning_rate),
            ("max_grad_norm", self.max_grad_norm),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        self.loss.validate()
    }

    /// Model sizes for data with the given layout.
    pub fn dims_for(&self, channels: usize, classes: usize, modalities: usize) -> ModelDims {
        ModelDims {
            input: channels,
            hidden: self.hidden_size,
            classes,
            modalities,
            sensor_hidden: self.sensor_hidden.unwrap_or(modalities),
            stacked: self.stacked,
            cell_bias: self.cell_bias,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_mean_f1: f64,
    /// Wall-clock seconds; excluded from serialized history.
    #[serde(skip)]
    pub seconds: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose parameters were kept.
    pub best_epoch: usize,
    pub best_val_mean_f1: f64,
}

/// Mean loss and mean gradients over `batch`, reduced in batch order.
pub fn batch_gradients(
    params: &ModelParams,
    cfg: &LossConfig,
    batch: &[&SequenceWindow],
) -> Result<(f64, Gradients)> {
    let per_window: Vec<(f64, Gradients)> = batch
        .par_iter()
        .map(|w| loss_and_gradients(params, cfg, &w.x, w.label).map(|(l, g, _)| (l.total, g)))
        .collect::<Result<_>>()?;
    let mut total = params.zeros_like();
    let mut loss = 0.0;
    for (l, g) in &per_window {
        loss += l;
        total.add_assign(g)?;
    }
    let n = batch.len() as f64;
    total.scale_in_place(1.0 / n);
    Ok((loss / n, total))
}

/// One optimizer update on `batch`: mean gradients, clip, Adam. Returns the
/// mean batch loss before the update.
pub fn train_step(
    params: &mut ModelParams,
    state: &mut OptimizerState,
    config: &TrainConfig,
    batch: &[&SequenceWindow],
) -> Result<f64> {
    let (loss, mut grads) = batch_gradients(params, &config.loss, batch)?;
    if !loss.is_finite() {
        return Err(Error::Numeric(format!("batch loss is {loss}")));
    }
    clip_global_norm(&mut grads, config.max_grad_norm)?;
    adam_step(state, params, &grads, config.learning_rate)?;
    Ok(loss)
}

/// Mini-batch training with validation-based model selection.
///
/// Returns the parameters of the epoch with the highest validation mean F1
/// (earliest on ties).
pub fn train(config: &TrainConfig, train_set: &WindowSet, val_set: &WindowSet) -> Result<(ModelParams, TrainHistory)> {
    config.validate()?;
    if train_set.is_empty() || val_set.is_empty() {
        return Err(Error::Data("training and validation splits must be non-empty".into()));
    }
    train_set.validate()?;
    val_set.validate()?;
    train_set.check_compatible(val_set)?;
    let dims = config.dims_for(train_set.channels, train_set.classes, train_set.modalities());
    let mut params = init_params(config.seed, &dims, config.loss.variant, train_set.modality_map.clone())?;
    let mut state = OptimizerState::new(&params, config.adam);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(0x5eed));

    let mut history = TrainHistory {
        best_val_mean_f1: f64::NEG_INFINITY,
        ..TrainHistory::default()
    };
    let mut best = params.clone();
    let mut stale = 0usize;
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    for epoch in 0..config.max_epochs {
        let started = Instant::now();
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut batches = 0usize;
        for (b, chunk) in order.chunks(config.batch_size).enumerate() {
            let batch: Vec<&SequenceWindow> = chunk.iter().map(|&i| &train_set.windows[i]).collect();
            let loss = train_step(&mut params, &mut state, config, &batch).map_err(|e| match e {
                Error::Numeric(message) => Error::Divergence {
                    epoch,
                    batch: b,
                    message,
                },
                other => other,
            })?;
            loss_sum += loss;
            batches += 1;
        }
        let val = evaluate(&params, &config.loss, val_set)?;
        let record = EpochRecord {
            epoch,
            train_loss: loss_sum / batches as f64,
            val_mean_f1: val.mean_f1,
            seconds: started.elapsed().as_secs_f64(),
        };
        log::info!(
            "epoch {epoch}: train loss {:.5}, val mean F1 {:.4} ({:.1}s)",
            record.train_loss,
            record.val_mean_f1,
            record.seconds
        );
        history.epochs.push(record);
        if val.mean_f1 > history.best_val_mean_f1 {
            history.best_val_mean_f1 = val.mean_f1;
            history.best_epoch = epoch;
            best = params.clone();
            stale = 0;
        } else {
            stale += 1;
            if stale > config.patience {
                break;
            }
        }
    }
    Ok((best, history))
}

/// Forward pass for each window, in order.
pub fn predict(params: &ModelParams, cfg: &LossConfig, windows: &[SequenceWindow]) -> Result<Vec<(usize, AttentionTrace)>> {
    windows
        .par_iter()
        .map(|w| forward(params, cfg, &w.x).map(|p| (p.predicted_class(), p.trace)))
        .collect()
}

pub fn evaluate(params: &ModelParams, cfg: &LossConfig, set: &WindowSet) -> Result<EvalReport> {
    if set.is_empty() {
        return Err(Error::Data("no windows to evaluate".into()));
    }
    let preds: Vec<usize> = set
        .windows
        .par_iter()
        .map(|w| forward(params, cfg, &w.x).map(|p| p.predicted_class()))
        .collect::<Result<_>>()?;
    let mut cm = ConfusionMatrix::new(set.classes);
    for (w, p) in set.windows.iter().zip(preds) {
        cm.accumulate(w.label, p)?;
    }
    cm.report()
}
