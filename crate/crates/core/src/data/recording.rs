use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::validate_modality_map;

/// Sidecar describing how to interpret a CSV recording.
///
/// ```toml
/// sample_rate = 100.0
/// modality_map = [0, 0, 0, 1, 1, 1]
/// class_names = ["null", "walk", "run"]
/// ```
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub sample_rate: f64,
    /// Modality index per channel, in CSV column order.
    pub modality_map: Vec<usize>,
    pub class_names: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modality_names: Option<Vec<String>>,
    /// Window length in samples, set for pre-windowed datasets.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window_length: Option<usize>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let m: Manifest = toml::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e
                .span()
                .map(|s| text[..s.start].lines().count().max(1))
                .unwrap_or(0),
            message: e.message().to_string(),
        })?;
        m.validate()?;
        Ok(m)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("manifest serializes")
    }

    pub fn modalities(&self) -> usize {
        self.modality_map.iter().copied().max().map_or(0, |m| m + 1)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sample_rate > 0.0) || !self.sample_rate.is_finite() {
            return Err(Error::Data(format!(
                "sample_rate must be positive, got {}",
                self.sample_rate
            )));
        }
        if self.class_names.is_empty() {
            return Err(Error::Data("manifest declares no classes".into()));
        }
        if self.modality_map.is_empty() {
            return Err(Error::Data("manifest declares no channels".into()));
        }
        validate_modality_map(&self.modality_map, self.modality_map.len(), self.modalities())
            .map_err(|e| Error::Data(e.to_string()))
    }
}

/// A continuous multichannel recording with per-sample labels.
///
/// Missing samples are stored as `NaN` until [`fill_missing`] runs.
#[derive(Clone, Debug, PartialEq)]
pub struct Recording {
    pub id: String,
    pub sample_rate: f64,
    pub channel_names: Vec<String>,
    /// One sequence per channel, all of equal length.
    pub channels: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub modality_map: Vec<usize>,
}

impl Recording {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn num_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn missing_count(&self) -> usize {
        self.channels
            .iter()
            .map(|c| c.iter().filter(|v| v.is_nan()).count())
            .sum()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sample_rate > 0.0) {
            return Err(Error::Data(format!("{}: sample rate must be positive", self.id)));
        }
        if let Some((i, c)) = self
            .channels
            .iter()
            .enumerate()
            .find(|(_, c)| c.len() != self.labels.len())
        {
            return Err(Error::Data(format!(
                "{}: channel {i} has {} samples, labels have {}",
                self.id,
                c.len(),
                self.labels.len()
            )));
        }
        Ok(())
    }
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

/// Reads a recording: header row, optional leading `timestamp` column,
/// channel columns, final `label` column. Empty cells become missing samples.
pub fn load_csv(path: &Path, manifest: &Manifest) -> Result<Recording> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let mut records = reader.records();

    let header = match records.next() {
        Some(r) => r.map_err(|e| parse_err(path, 1, e.to_string()))?,
        None => return Err(parse_err(path, 1, "empty file")),
    };
    let cols: Vec<&str> = header.iter().collect();
    if cols.last().map(|c| c.eq_ignore_ascii_case("label")) != Some(true) {
        return Err(parse_err(path, 1, "last header column must be `label`"));
    }
    let skip_ts = cols
        .first()
        .is_some_and(|c| c.eq_ignore_ascii_case("timestamp"));
    let first = usize::from(skip_ts);
    let channel_names: Vec<String> = cols[first..cols.len() - 1]
        .iter()
        .map(|s| s.to_string())
        .collect();
    if channel_names.len() != manifest.modality_map.len() {
        return Err(parse_err(
            path,
            1,
            format!(
                "header has {} channels, manifest maps {}",
                channel_names.len(),
                manifest.modality_map.len()
            ),
        ));
    }

    let mut channels = vec![Vec::new(); channel_names.len()];
    let mut labels = Vec::new();
    for rec in records {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_err(path, line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() == 1 && rec.get(0) == Some("") {
            continue;
        }
        if rec.len() != cols.len() {
            return Err(parse_err(
                path,
                line,
                format!("expected {} columns, found {}", cols.len(), rec.len()),
            ));
        }
        for (ch, cell) in rec.iter().skip(first).take(channel_names.len()).enumerate() {
            let v = if cell.is_empty() {
                f64::NAN
            } else {
                cell.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| {
                        parse_err(path, line, format!("non-numeric value `{cell}` in column {}", channel_names[ch]))
                    })?
            };
            channels[ch].push(v);
        }
        let raw = rec.get(cols.len() - 1).unwrap_or_default();
        let label = raw
            .parse::<usize>()
            .ok()
            .filter(|&l| l < manifest.class_names.len())
            .ok_or_else(|| parse_err(path, line, format!("unknown label `{raw}`")))?;
        labels.push(label);
    }

    Ok(Recording {
        id: path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default(),
        sample_rate: manifest.sample_rate,
        channel_names,
        channels,
        labels,
        modality_map: manifest.modality_map.clone(),
    })
}

/// Linear interpolation between the nearest present samples; edge gaps take
/// the nearest present value.
pub fn fill_missing(mut rec: Recording) -> Result<Recording> {
    for (ch, values) in rec.channels.iter_mut().enumerate() {
        let present: Vec<usize> = (0..values.len()).filter(|&i| !values[i].is_nan()).collect();
        let (Some(&first), Some(&last)) = (present.first(), present.last()) else {
            if values.is_empty() {
                continue;
            }
            return Err(Error::Data(format!(
                "{}: channel {} ({}) has no present samples",
                rec.id,
                ch,
                rec.channel_names.get(ch).map_or("?", |s| s.as_str())
            )));
        };
        let (lead, tail) = (values[first], values[last]);
        values[..first].fill(lead);
        values[last + 1..].fill(tail);
        for pair in present.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            if b - a > 1 {
                let (va, vb) = (values[a], values[b]);
                for i in a + 1..b {
                    let w = (i - a) as f64 / (b - a) as f64;
                    values[i] = va + w * (vb - va);
                }
            }
        }
    }
    Ok(rec)
}

/// Source index ranges `[⌊n·r⌋, ⌊(n+1)·r⌋)` of each output sample for
/// decimation ratio `r`; a trailing partial block is dropped.
pub fn decimation_blocks(len: usize, ratio: f64) -> Vec<(usize, usize)> {
    let mut blocks = Vec::new();
    let mut n = 0usize;
    loop {
        let start = (n as f64 * ratio).floor() as usize;
        let end = ((n + 1) as f64 * ratio).floor() as usize;
        if end > len || end <= start {
            break;
        }
        blocks.push((start, end));
        n += 1;
    }
    blocks
}

/// Block-average decimation to `target_rate`; labels by majority per block
/// with ties going to the label seen first.
pub fn downsample(rec: &Recording, target_rate: f64) -> Result<Recording> {
    if !(target_rate > 0.0) || !target_rate.is_finite() {
        return Err(Error::arg(format!("target rate must be positive, got {target_rate}")));
    }
    if target_rate > rec.sample_rate {
        return Err(Error::arg(format!(
            "cannot downsample {} Hz to a higher rate {target_rate} Hz",
            rec.sample_rate
        )));
    }
    let ratio = rec.sample_rate / target_rate;
    let blocks = decimation_blocks(rec.len(), ratio);
    let channels = rec
        .channels
        .iter()
        .map(|c| {
            blocks
                .iter()
                .map(|&(s, e)| {
                    let present: Vec<f64> = c[s..e].iter().copied().filter(|v| !v.is_nan()).collect();
                    if present.is_empty() {
                        f64::NAN
                    } else {
                        present.iter().sum::<f64>() / present.len() as f64
                    }
                })
                .collect()
        })
        .collect();
    let labels = blocks
        .iter()
        .map(|&(s, e)| majority_first(&rec.labels[s..e]))
        .collect();
    Ok(Recording {
        id: rec.id.clone(),
        sample_rate: target_rate,
        channel_names: rec.channel_names.clone(),
        channels,
        labels,
        modality_map: rec.modality_map.clone(),
    })
}

fn majority_first(labels: &[usize]) -> usize {
    let mut best = labels[0];
    let mut best_count = 0;
    for (i, &l) in labels.iter().enumerate() {
        if labels[..i].contains(&l) {
            continue;
        }
        let count = labels.iter().filter(|&&x| x == l).count();
        if count > best_count {
            best = l;
            best_count = count;
        }
    }
    best
}

pub fn manifest_path_for(dir: &Path) -> PathBuf {
    dir.join("manifest.toml")
}
