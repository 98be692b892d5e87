//! Ingestion, preprocessing and segmentation of multichannel recordings, plus
//! the synthetic planted-motif benchmark.
//!
//! Typical flow for real recordings: [`load_csv`] → [`fill_missing`] →
//! [`downsample`] → [`compute_stats`] on the training split →
//! [`standardize`] every split → [`window`].

mod preprocess;
mod recording;
mod synthetic;
mod window;

pub use preprocess::{
    compute_stats, compute_window_stats, standardize, standardize_windows, ChannelStats, Split,
    STD_FLOOR,
};
pub use recording::{
    decimation_blocks, downsample, fill_missing, load_csv, manifest_path_for, Manifest, Recording,
};
pub use synthetic::{gen_synthetic, motif_value, MotifShape, SyntheticSpec};
pub use window::{
    preset, read_window_csv, window, window_with, write_window_csv, GroundTruth, LabelRule, Preset,
    SequenceWindow, SourceSpan, WindowGeometry, WindowSet, PRESETS,
};
