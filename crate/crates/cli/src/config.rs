//! Run configuration, one TOML file with `[dataset]`, `[model]`, `[training]`
//! and `[output]` sections. Relative paths resolve against the directory of
//! the config file.
//!
//! ```toml
//! [dataset]
//! source = "synthetic"
//!
//! [dataset.synthetic]
//! n_windows = 400
//!
//! [model]
//! variant = "temporal_sensor"
//! hidden = 16
//!
//! [training]
//! max_epochs = 5
//!
//! [output]
//! dir = "run"
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use attn_lstm::data::{LabelRule, SyntheticSpec};
use attn_lstm::model::{LossConfig, Variant};
use attn_lstm::training::{AdamConfig, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    /// Generated in memory from `[dataset.synthetic]`.
    Synthetic,
    /// Raw recordings plus a manifest, windowed on load.
    Csv,
    /// Pre-windowed `train.csv`/`val.csv`/`test.csv` as written by `gen-synthetic`.
    Windows,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSection {
    pub source: DataSource,
    /// Generator spec; with `source = "windows"` it only drives `gen-synthetic`.
    #[serde(default)]
    pub synthetic: Option<SyntheticSpec>,
    /// Directory for `source = "windows"`.
    #[serde(default)]
    pub dir: Option<PathBuf>,
    /// Manifest for `source = "csv"`.
    #[serde(default)]
    pub manifest: Option<PathBuf>,
    #[serde(default)]
    pub train: Vec<PathBuf>,
    #[serde(default)]
    pub validation: Vec<PathBuf>,
    #[serde(default)]
    pub test: Vec<PathBuf>,
    /// Named preprocessing parameters (`pamap2`, `dg`, `skoda`); explicit
    /// fields below override it.
    #[serde(default)]
    pub preset: Option<String>,
    #[serde(default)]
    pub target_rate: Option<f64>,
    #[serde(default)]
    pub window_seconds: Option<f64>,
    #[serde(default)]
    pub overlap: Option<f64>,
    #[serde(default)]
    pub label_rule: LabelRule,
    #[serde(default = "yes")]
    pub standardize: bool,
    /// Replaces the data's channel→modality map.
    #[serde(default)]
    pub modality_map: Option<Vec<usize>>,
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub variant: Variant,
    pub hidden: usize,
    /// Groups channels into this many contiguous modalities, overriding the
    /// data's map.
    pub modalities: Option<usize>,
    /// Sensor-attention energy width `k`; defaults to the modality count.
    pub k: Option<usize>,
    pub stacked: bool,
    pub cell_bias: bool,
    pub lambda1: f64,
    pub lambda2: f64,
}

impl Default for ModelSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        ModelSection {
            variant: t.loss.variant,
            hidden: t.hidden_size,
            modalities: None,
            k: None,
            stacked: false,
            cell_bias: false,
            lambda1: t.loss.lambda1,
            lambda2: t.loss.lambda2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingSection {
    pub learning_rate: f64,
    pub max_grad_norm: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
    pub adam: AdamConfig,
}

impl Default for TrainingSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        TrainingSection {
            learning_rate: t.learning_rate,
            max_grad_norm: t.max_grad_norm,
            batch_size: t.batch_size,
            max_epochs: t.max_epochs,
            patience: t.patience,
            seed: t.seed,
            adam: t.adam,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    /// Base directory for the files below.
    pub dir: PathBuf,
    pub checkpoint: PathBuf,
    pub history: PathBuf,
    pub report: PathBuf,
    pub trace: PathBuf,
    /// Include each window's raw input in trace records.
    pub trace_include_x: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: "out".into(),
            checkpoint: "model.ckpt".into(),
            history: "history.json".into(),
            report: "report.txt".into(),
            trace: "trace.jsonl".into(),
            trace_include_x: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: DatasetSection,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub training: TrainingSection,
    #[serde(default)]
    pub output: OutputSection,
    /// Directory the config was loaded from.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: RunConfig = toml::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        let d = &self.dataset;
        match d.source {
            DataSource::Synthetic => {
                if d.dir.is_some() || d.manifest.is_some() || !d.train.is_empty() {
                    return bad("dataset: source = \"synthetic\" takes no paths".into());
                }
            }
            DataSource::Windows => {
                if d.dir.is_none() {
                    return bad("dataset.dir is required for source = \"windows\"".into());
                }
                if d.manifest.is_some() || !d.train.is_empty() {
                    return bad("dataset: source = \"windows\" takes `dir` and an optional generator spec".into());
                }
            }
            DataSource::Csv => {
                if d.manifest.is_none() || d.train.is_empty() || d.validation.is_empty() || d.test.is_empty() {
                    return bad(
                        "dataset: source = \"csv\" needs `manifest`, `train`, `validation` and `test`".into(),
                    );
                }
                if d.synthetic.is_some() || d.dir.is_some() {
                    return bad("dataset: source = \"csv\" takes no `synthetic` or `dir`".into());
                }
                if d.preset.is_none() && d.window_seconds.is_none() {
                    return bad("dataset: set `preset` or `window_seconds`".into());
                }
            }
        }
        if let Some(name) = &d.preset {
            if attn_lstm::data::preset(name).is_none() {
                return bad(format!("dataset.preset: unknown preset `{name}`"));
            }
        }
        if let Some(o) = d.overlap {
            if !(0.0..1.0).contains(&o) {
                return bad(format!("dataset.overlap must be in [0, 1), got {o}"));
            }
        }
        for (field, v) in [("model.lambda1", self.model.lambda1), ("model.lambda2", self.model.lambda2)] {
            if !(v >= 0.0) || !v.is_finite() {
                return bad(format!("{field} must be a non-negative number, got {v}"));
            }
        }
        if self.model.modalities == Some(0) {
            return bad("model.modalities must be positive".into());
        }
        self.train_config()
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn loss_config(&self) -> LossConfig {
        LossConfig {
            variant: self.model.variant,
            lambda1: self.model.lambda1,
            lambda2: self.model.lambda2,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        let t = &self.training;
        TrainConfig {
            hidden_size: self.model.hidden,
            sensor_hidden: self.model.k,
            stacked: self.model.stacked,
            cell_bias: self.model.cell_bias,
            learning_rate: t.learning_rate,
            max_grad_norm: t.max_grad_norm,
            batch_size: t.batch_size,
            max_epochs: t.max_epochs,
            patience: t.patience,
            seed: t.seed,
            loss: self.loss_config(),
            adam: t.adam,
        }
    }

    /// Applies a command-line `--seed` to training and synthetic generation.
    pub fn override_seed(&mut self, seed: u64) {
        self.training.seed = seed;
        if let Some(s) = self.dataset.synthetic.as_mut() {
            s.seed = seed;
        }
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn output_dir(&self) -> PathBuf {
        self.resolve(&self.output.dir)
    }

    pub fn checkpoint_path(&self) -> PathBuf {
        self.output_dir().join(&self.output.checkpoint)
    }

    pub fn history_path(&self) -> PathBuf {
        self.output_dir().join(&self.output.history)
    }

    pub fn report_path(&self) -> PathBuf {
        self.output_dir().join(&self.output.report)
    }

    pub fn trace_path(&self) -> PathBuf {
        self.output_dir().join(&self.output.trace)
    }
}
