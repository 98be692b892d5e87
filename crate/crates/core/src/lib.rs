//! Continuity-regularized attention LSTMs for multichannel time-series
//! classification.
//!
//! The crate is organised bottom-up:
//!
//! - [`numerics`]: dense row-major matrices, the differentiable primitives
//!   (matmul, softmax, sigmoid/tanh) with their vector-Jacobian products, and
//!   a central-difference gradient checker.
//! - [`model`]: LSTM with optional temporal attention over hidden states and
//!   optional sensor-modality attention over the inputs, the cross-entropy
//!   loss with L1 continuity penalties on both attention sequences, and the
//!   hand-written reverse pass.
//! - [`training`]: initialization, global-norm clipping, Adam, the mini-batch
//!   loop with validation-based model selection, and the binary checkpoint
//!   format.
//! - [`data`]: CSV ingestion, gap filling, block-average downsampling,
//!   standardization, sliding windows and the planted-motif generator.
//! - [`metrics`]: confusion matrices and (macro / weighted) mean F1.

pub mod data;
pub mod error;
pub mod metrics;
pub mod model;
pub mod numerics;
pub mod training;

pub use error::{Error, Result};
pub use numerics::Matrix;
