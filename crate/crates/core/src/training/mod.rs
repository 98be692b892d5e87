//! Initialization, optimization and persistence.
//!
//! The optimizer is Adam (learning rate 0.05 by default) with gradients
//! clipped to a global L2 norm of 1 before every update. Each epoch visits
//! the training windows in a seeded shuffle; batch loss is the mean over the
//! batch.

pub mod checkpoint;
mod init;
mod optim;
mod trainer;

pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, load_checkpoint_for, save_checkpoint,
    CheckpointError, CheckpointMeta,
};
pub use init::init_params;
pub use optim::{adam_step, clip_global_norm, AdamConfig, OptimizerState};
pub use trainer::{
    batch_gradients, evaluate, predict, train, train_step, EpochRecord, TrainConfig, TrainHistory,
};
