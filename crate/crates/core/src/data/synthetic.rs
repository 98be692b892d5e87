//! Planted-motif benchmark with known attention ground truth.
//!
//! Every window is Gaussian noise on all channels. A class-specific raised
//! sinusoid `a_c · (0.6 + 0.4 · sin(2π f_c τ))` is added to the channels of the
//! class's informative modality over a random contiguous interval. The motif
//! never crosses zero, so with zero noise its support is exactly the interval.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::window::{GroundTruth, SequenceWindow, SourceSpan, WindowSet};
use crate::error::{Error, Result};
use crate::model::contiguous_modality_map;
use crate::numerics::Matrix;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MotifShape {
    /// Cycles per sample.
    pub frequency: f64,
    pub amplitude: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub n_windows: usize,
    /// Window length `T`.
    pub length: usize,
    /// Channels `D`.
    pub channels: usize,
    /// Modalities `M`; channels are assigned to them in contiguous blocks.
    pub modalities: usize,
    /// Classes `C`.
    pub classes: usize,
    /// Motif per class; generated from `classes` when empty.
    pub motifs: Vec<MotifShape>,
    pub motif_min_len: usize,
    pub motif_max_len: usize,
    /// Informative modality per class; `c mod M` when empty.
    pub informative_modality: Vec<usize>,
    pub noise_std: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            n_windows: 2000,
            length: 64,
            channels: 6,
            modalities: 3,
            classes: 2,
            motifs: Vec::new(),
            motif_min_len: 8,
            motif_max_len: 19,
            informative_modality: Vec::new(),
            noise_std: 0.5,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn motif(&self, class: usize) -> MotifShape {
        self.motifs.get(class).cloned().unwrap_or(MotifShape {
            frequency: 0.08 + 0.12 * class as f64,
            amplitude: 1.5,
        })
    }

    pub fn informative(&self, class: usize) -> usize {
        self.informative_modality
            .get(class)
            .copied()
            .unwrap_or(class % self.modalities.max(1))
    }

    pub fn modality_map(&self) -> Vec<usize> {
        contiguous_modality_map(self.channels, self.modalities)
    }

    pub fn channel_names(&self) -> Vec<String> {
        (0..self.channels).map(|d| format!("ch{d}")).collect()
    }

    pub fn class_names(&self) -> Vec<String> {
        (0..self.classes).map(|c| format!("class{c}")).collect()
    }

    /// Window counts of the 70/15/15 train/validation/test split.
    pub fn split_sizes(&self) -> (usize, usize, usize) {
        let train = (self.n_windows as f64 * 0.70).round() as usize;
        let val = (self.n_windows as f64 * 0.15).round() as usize;
        (train, val, self.n_windows - train - val)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n_windows == 0 || self.length == 0 || self.classes == 0 {
            return bad("n_windows, length and classes must be positive".into());
        }
        if self.modalities == 0 || self.modalities > self.channels {
            return bad(format!(
                "need 1 ≤ modalities ≤ channels, got {} modalities for {} channels",
                self.modalities, self.channels
            ));
        }
        if self.motif_min_len == 0 || self.motif_min_len > self.motif_max_len || self.motif_max_len > self.length {
            return bad(format!(
                "motif length range [{}, {}] must be non-empty and within the window length {}",
                self.motif_min_len, self.motif_max_len, self.length
            ));
        }
        if !(self.noise_std >= 0.0) || !self.noise_std.is_finite() {
            return bad(format!("noise_std must be non-negative, got {}", self.noise_std));
        }
        if !self.motifs.is_empty() && self.motifs.len() != self.classes {
            return bad(format!("{} motifs for {} classes", self.motifs.len(), self.classes));
        }
        if !self.informative_modality.is_empty() && self.informative_modality.len() != self.classes {
            return bad(format!(
                "{} informative modalities for {} classes",
                self.informative_modality.len(),
                self.classes
            ));
        }
        if let Some(&m) = self.informative_modality.iter().find(|&&m| m >= self.modalities) {
            return bad(format!("informative modality {m} ≥ {}", self.modalities));
        }
        Ok(())
    }
}

/// Value of the raised sinusoid `τ` samples into the motif.
pub fn motif_value(shape: &MotifShape, tau: usize) -> f64 {
    shape.amplitude * (0.6 + 0.4 * (std::f64::consts::TAU * shape.frequency * tau as f64).sin())
}

/// Generates the dataset and splits it 70/15/15 in generation order.
pub fn gen_synthetic(spec: &SyntheticSpec) -> Result<(WindowSet, WindowSet, WindowSet)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise = Normal::new(0.0, spec.noise_std).map_err(|e| Error::Config(e.to_string()))?;
    let map = spec.modality_map();
    let mut windows = Vec::with_capacity(spec.n_windows);
    for i in 0..spec.n_windows {
        let class = rng.random_range(0..spec.classes);
        let dur = rng.random_range(spec.motif_min_len..=spec.motif_max_len);
        let start = rng.random_range(0..=spec.length - dur);
        let modality = spec.informative(class);
        let shape = spec.motif(class);
        let mut x = Matrix::zeros(spec.length, spec.channels);
        for v in x.as_mut_slice() {
            *v = noise.sample(&mut rng);
        }
        for t in start..start + dur {
            let m = motif_value(&shape, t - start);
            for (ch, &cm) in map.iter().enumerate() {
                if cm == modality {
                    x.set(t, ch, x.get(t, ch) + m);
                }
            }
        }
        windows.push(SequenceWindow {
            x,
            label: class,
            source: SourceSpan {
                recording: "synthetic".into(),
                start: i,
            },
            ground_truth: Some(GroundTruth {
                motif_start: start,
                motif_end: start + dur,
                modality,
            }),
        });
    }
    let (n_train, n_val, _) = spec.split_sizes();
    let test = windows.split_off(n_train + n_val);
    let val = windows.split_off(n_train);
    let set = |windows| WindowSet {
        windows,
        channels: spec.channels,
        classes: spec.classes,
        modality_map: map.clone(),
        class_names: spec.class_names(),
    };
    Ok((set(windows), set(val), set(test)))
}
