//! LSTM classifiers with optional temporal and sensor-modality attention.
//!
//! Four variants share one code path:
//!
//! | variant           | inputs to LSTM      | classifier input          |
//! |-------------------|---------------------|---------------------------|
//! | `plain`           | `x_t`               | `h_T`                     |
//! | `temporal`        | `x_t`               | `H = Σ α_t h_t`           |
//! | `sensor`          | `β_t ⊙ x_t`         | `h_T`                     |
//! | `temporal_sensor` | `β_t ⊙ x_t`         | `H = Σ α_t h_t`           |
//!
//! The loss is cross-entropy plus `λ1 Σ_{t≥2} |α_t − α_{t−1}|` and
//! `λ2 Σ_{t≥2} ‖β_t − β_{t−1}‖₁` for the attention the variant carries.
//!
//! Figure-style architectures with a second stacked LSTM layer are supported
//! through [`ModelDims::stacked`]; the default is a single layer. Temporal
//! attention always reads the topmost layer.

mod attention;
mod loss;
mod lstm;
mod network;
mod params;

pub use attention::{
    sensor_attention_backward, sensor_attention_forward, sensor_attention_step,
    temporal_attention, temporal_attention_backward, SensorTrace, TemporalContext,
};
pub use loss::{
    cross_entropy, total_variation, total_variation_rows, total_variation_rows_subgradient,
    total_variation_subgradient, LossBreakdown, LossConfig, PROB_FLOOR,
};
pub use lstm::{lstm_backward, lstm_forward, lstm_step, GateCache, LstmStates};
pub use network::{
    argmax, backward, forward, forward_with_alpha, loss, loss_and_gradients, loss_value,
    AttentionTrace, ForwardCache, ForwardPass,
};
pub use params::{
    contiguous_modality_map, validate_modality_map, ClassifierHead, Gradients, LstmParams,
    ModelDims, ModelParams, SensorAttentionParams, TemporalAttentionParams, Variant,
};
