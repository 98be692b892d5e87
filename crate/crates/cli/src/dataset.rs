//! Turns the `[dataset]` section into train/validation/test window sets.

use std::fs;
use std::path::{Path, PathBuf};

use attn_lstm::data::{
    compute_stats, compute_window_stats, downsample, fill_missing, gen_synthetic, load_csv,
    manifest_path_for, preset, read_window_csv, standardize, standardize_windows, window_with,
    GroundTruth, Manifest, Recording, SequenceWindow, Split, SyntheticSpec, WindowGeometry,
    WindowSet,
};
use attn_lstm::model::{contiguous_modality_map, validate_modality_map};
use attn_lstm::Error;

use crate::config::{DataSource, RunConfig};
use crate::error::CliError;

pub const SPLIT_FILES: [&str; 3] = ["train.csv", "val.csv", "test.csv"];
pub const GROUND_TRUTH_FILE: &str = "ground_truth.csv";

#[derive(Clone, Debug)]
pub struct Splits {
    pub train: WindowSet,
    pub validation: WindowSet,
    pub test: WindowSet,
}

pub fn load_splits(cfg: &RunConfig) -> Result<Splits, CliError> {
    let mut splits = match cfg.dataset.source {
        DataSource::Synthetic => {
            let spec = cfg.dataset.synthetic.clone().unwrap_or_default();
            let (train, validation, test) = gen_synthetic(&spec)?;
            Splits { train, validation, test }
        }
        DataSource::Windows => load_window_dir(&cfg.resolve(cfg.dataset.dir.as_deref().unwrap_or(Path::new("."))))?,
        DataSource::Csv => load_recordings(cfg)?,
    };
    let channels = splits.train.channels;
    let map = if let Some(m) = &cfg.dataset.modality_map {
        Some(m.clone())
    } else {
        cfg.model.modalities.map(|m| contiguous_modality_map(channels, m))
    };
    if let Some(map) = map {
        let m = map.iter().copied().max().map_or(0, |v| v + 1);
        validate_modality_map(&map, channels, m).map_err(|e| CliError::Config(format!("modality map: {e}")))?;
        for set in [&mut splits.train, &mut splits.validation, &mut splits.test] {
            set.modality_map = map.clone();
        }
    }
    if cfg.dataset.standardize && cfg.dataset.source != DataSource::Csv {
        // Recordings are standardized before windowing; pre-cut windows here.
        let stats = compute_window_stats(&splits.train.windows, Split::Train)?;
        for set in [&mut splits.train, &mut splits.validation, &mut splits.test] {
            standardize_windows(&mut set.windows, &stats)?;
        }
    }
    splits.train.check_compatible(&splits.validation)?;
    splits.train.check_compatible(&splits.test)?;
    Ok(splits)
}

fn load_window_dir(dir: &Path) -> Result<Splits, CliError> {
    let manifest = Manifest::load(&manifest_path_for(dir))?;
    let classes = manifest.class_names.len();
    let mut sets = Vec::with_capacity(3);
    for name in SPLIT_FILES {
        let windows = read_window_csv(&dir.join(name), classes)?;
        let wrong_len = manifest
            .window_length
            .and_then(|len| windows.iter().find(|w| w.x.rows() != len).map(|w| (len, w)));
        if let Some((len, w)) = wrong_len {
            return Err(Error::Data(format!(
                "{}: window {} has {} timesteps, manifest says {len}",
                dir.join(name).display(),
                w.source.start,
                w.x.rows()
            ))
            .into());
        }
        sets.push(WindowSet {
            windows,
            channels: manifest.modality_map.len(),
            classes,
            modality_map: manifest.modality_map.clone(),
            class_names: manifest.class_names.clone(),
        });
    }
    let gt_path = dir.join(GROUND_TRUTH_FILE);
    if gt_path.exists() {
        attach_ground_truth(&gt_path, &mut sets)?;
    }
    let test = sets.pop().expect("three splits");
    let validation = sets.pop().expect("three splits");
    let train = sets.pop().expect("three splits");
    Ok(Splits { train, validation, test })
}

/// Reads `split,window_id,motif_start,motif_end,modality` rows.
fn attach_ground_truth(path: &Path, sets: &mut [WindowSet]) -> Result<(), CliError> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let perr = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    for (i, line) in text.lines().enumerate().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let nums: Vec<usize> = f
            .iter()
            .skip(1)
            .map(|s| s.trim().parse::<usize>())
            .collect::<Result<_, _>>()
            .map_err(|e| perr(i + 1, e.to_string()))?;
        if f.len() != 5 {
            return Err(perr(i + 1, format!("expected 5 columns, found {}", f.len())).into());
        }
        let split = SPLIT_FILES
            .iter()
            .position(|s| s.trim_end_matches(".csv") == f[0])
            .ok_or_else(|| perr(i + 1, format!("unknown split `{}`", f[0])))?;
        let w = sets[split]
            .windows
            .get_mut(nums[0])
            .ok_or_else(|| perr(i + 1, format!("no window {} in split {}", nums[0], f[0])))?;
        w.ground_truth = Some(GroundTruth {
            motif_start: nums[1],
            motif_end: nums[2],
            modality: nums[3],
        });
    }
    Ok(())
}

fn load_recordings(cfg: &RunConfig) -> Result<Splits, CliError> {
    let d = &cfg.dataset;
    let manifest = Manifest::load(&cfg.resolve(d.manifest.as_deref().expect("validated")))?;
    let p = d.preset.as_deref().and_then(preset);
    let target_rate = d.target_rate.or(p.map(|p| p.target_rate));
    let seconds = d.window_seconds.or(p.map(|p| p.window_seconds)).expect("validated");
    let overlap = d.overlap.or(p.map(|p| p.overlap)).unwrap_or(0.0);

    let read = |paths: &[PathBuf]| -> Result<Vec<Recording>, CliError> {
        paths
            .iter()
            .map(|path| {
                let rec = fill_missing(load_csv(&cfg.resolve(path), &manifest)?)?;
                Ok(match target_rate {
                    Some(r) if r < rec.sample_rate => downsample(&rec, r)?,
                    _ => rec,
                })
            })
            .collect()
    };
    let mut parts = [read(&d.train)?, read(&d.validation)?, read(&d.test)?];
    if d.standardize {
        let stats = compute_stats(&parts[0], Split::Train)?;
        for part in parts.iter_mut() {
            for rec in part.iter_mut() {
                *rec = standardize(rec, &stats)?;
            }
        }
    }
    let rate = parts[0][0].sample_rate;
    let geom = WindowGeometry::new(seconds, overlap, rate)?;
    log::info!("window length {} samples, step {} at {rate} Hz", geom.length, geom.step);
    let mut sets = parts.into_iter().map(|recs| -> Result<WindowSet, CliError> {
        let mut windows: Vec<SequenceWindow> = Vec::new();
        for rec in &recs {
            windows.extend(window_with(rec, geom, d.label_rule)?);
        }
        Ok(WindowSet {
            windows,
            channels: manifest.modality_map.len(),
            classes: manifest.class_names.len(),
            modality_map: manifest.modality_map.clone(),
            class_names: manifest.class_names.clone(),
        })
    });
    Ok(Splits {
        train: sets.next().expect("three splits")?,
        validation: sets.next().expect("three splits")?,
        test: sets.next().expect("three splits")?,
    })
}

/// Spec used by `gen-synthetic`.
pub fn synthetic_spec(cfg: &RunConfig) -> SyntheticSpec {
    cfg.dataset.synthetic.clone().unwrap_or_default()
}
