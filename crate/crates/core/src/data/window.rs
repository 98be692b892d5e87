use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::recording::Recording;
use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// Where a window was cut from.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceSpan {
    pub recording: String,
    pub start: usize,
}

/// Planted-motif location, known only for synthetic data.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruth {
    /// First timestep of the motif.
    pub motif_start: usize,
    /// One past the last timestep of the motif.
    pub motif_end: usize,
    /// Modality carrying the motif.
    pub modality: usize,
}

impl GroundTruth {
    pub fn motif_len(&self) -> usize {
        self.motif_end - self.motif_start
    }
}

/// One labelled `T × D` segment.
#[derive(Clone, Debug, PartialEq)]
pub struct SequenceWindow {
    pub x: Matrix,
    pub label: usize,
    pub source: SourceSpan,
    pub ground_truth: Option<GroundTruth>,
}

/// How a window's label is derived from its per-sample labels.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelRule {
    /// Most frequent label; ties go to the tied label occurring last.
    #[default]
    Majority,
    LastSample,
}

impl LabelRule {
    pub fn apply(self, labels: &[usize]) -> usize {
        match self {
            LabelRule::LastSample => *labels.last().expect("non-empty window"),
            LabelRule::Majority => {
                let mut best = labels[labels.len() - 1];
                let mut best_count = 0;
                // Scan from the end so the first maximum found is the latest.
                for (i, &l) in labels.iter().enumerate().rev() {
                    if labels[i + 1..].contains(&l) {
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
        }
    }
}

/// Window length and step in samples.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct WindowGeometry {
    pub length: usize,
    pub step: usize,
}

impl WindowGeometry {
    /// `L = round(seconds · rate)`, `S = max(1, round(L · (1 − overlap)))`.
    pub fn new(window_seconds: f64, overlap: f64, sample_rate: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&overlap) {
            return Err(Error::arg(format!("overlap must be in [0, 1), got {overlap}")));
        }
        let length = (window_seconds * sample_rate).round();
        if !(length >= 1.0) || !length.is_finite() {
            return Err(Error::arg(format!(
                "a {window_seconds} s window at {sample_rate} Hz has no samples"
            )));
        }
        let length = length as usize;
        let step = ((length as f64 * (1.0 - overlap)).round() as usize).max(1);
        Ok(WindowGeometry { length, step })
    }

    /// Number of full windows in a recording of `len` samples.
    pub fn count(&self, len: usize) -> usize {
        if len < self.length {
            0
        } else {
            (len - self.length) / self.step + 1
        }
    }
}

/// Cuts full-length windows at starts `0, S, 2S, …`; a trailing partial
/// window is discarded.
pub fn window(
    rec: &Recording,
    window_seconds: f64,
    overlap: f64,
    rule: LabelRule,
) -> Result<Vec<SequenceWindow>> {
    let geom = WindowGeometry::new(window_seconds, overlap, rec.sample_rate)?;
    window_with(rec, geom, rule)
}

pub fn window_with(rec: &Recording, geom: WindowGeometry, rule: LabelRule) -> Result<Vec<SequenceWindow>> {
    rec.validate()?;
    let d = rec.num_channels();
    let mut out = Vec::with_capacity(geom.count(rec.len()));
    for n in 0..geom.count(rec.len()) {
        let start = n * geom.step;
        let x = Matrix::from_fn(geom.length, d, |t, ch| rec.channels[ch][start + t]);
        out.push(SequenceWindow {
            x,
            label: rule.apply(&rec.labels[start..start + geom.length]),
            source: SourceSpan {
                recording: rec.id.clone(),
                start,
            },
            ground_truth: None,
        });
    }
    Ok(out)
}

/// Resampling and windowing parameters for a known dataset.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Preset {
    pub name: &'static str,
    pub target_rate: f64,
    pub window_seconds: f64,
    pub overlap: f64,
    pub note: &'static str,
}

pub const PRESETS: [Preset; 3] = [
    Preset {
        name: "pamap2",
        // 100 Hz decimated by 3
        target_rate: 100.0 / 3.0,
        window_seconds: 5.12,
        overlap: 0.78,
        note: "52 channels; standardized; participant 5 validation, 6 test",
    },
    Preset {
        name: "dg",
        target_rate: 32.0,
        window_seconds: 1.0,
        overlap: 0.0,
        note: "9 channels; binary freezing-of-gait vs no-freeze; overlap not published",
    },
    Preset {
        name: "skoda",
        target_rate: 33.0,
        window_seconds: 1.0,
        overlap: 0.0,
        note: "60 channels from 10 right-arm sensors; window length not published",
    },
];

pub fn preset(name: &str) -> Option<&'static Preset> {
    PRESETS.iter().find(|p| p.name.eq_ignore_ascii_case(name))
}

impl Preset {
    pub fn geometry(&self) -> WindowGeometry {
        WindowGeometry::new(self.window_seconds, self.overlap, self.target_rate)
            .expect("presets are valid")
    }
}

/// A split's windows plus the layout they share.
#[derive(Clone, Debug, PartialEq)]
pub struct WindowSet {
    pub windows: Vec<SequenceWindow>,
    pub channels: usize,
    pub classes: usize,
    pub modality_map: Vec<usize>,
    pub class_names: Vec<String>,
}

impl WindowSet {
    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }

    pub fn modalities(&self) -> usize {
        self.modality_map.iter().copied().max().map_or(0, |m| m + 1)
    }

    pub fn validate(&self) -> Result<()> {
        for (i, w) in self.windows.iter().enumerate() {
            if w.x.cols() != self.channels {
                return Err(Error::Data(format!(
                    "window {i} has {} channels, set declares {}",
                    w.x.cols(),
                    self.channels
                )));
            }
            if w.label >= self.classes {
                return Err(Error::Data(format!(
                    "window {i} label {} outside {} classes",
                    w.label, self.classes
                )));
            }
        }
        Ok(())
    }

    /// Checks that two splits can share one model.
    pub fn check_compatible(&self, other: &WindowSet) -> Result<()> {
        if self.channels != other.channels
            || self.classes != other.classes
            || self.modality_map != other.modality_map
        {
            return Err(Error::Data(
                "splits disagree on channels, classes or modality map".into(),
            ));
        }
        Ok(())
    }
}

/// Writes windows as CSV: `window_id`, one column per channel, `label`;
/// one row per timestep.
pub fn write_window_csv(path: &Path, windows: &[SequenceWindow], channel_names: &[String]) -> Result<()> {
    let mut out = String::new();
    out.push_str("window_id");
    for n in channel_names {
        out.push(',');
        out.push_str(n);
    }
    out.push_str(",label\n");
    for (id, w) in windows.iter().enumerate() {
        for t in 0..w.x.rows() {
            out.push_str(&id.to_string());
            for v in w.x.row(t) {
                out.push(',');
                // `{:?}` prints the shortest string that round-trips.
                out.push_str(&format!("{v:?}"));
            }
            out.push(',');
            out.push_str(&w.label.to_string());
            out.push('\n');
        }
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
}

/// Reads a file written by [`write_window_csv`].
pub fn read_window_csv(path: &Path, classes: usize) -> Result<Vec<SequenceWindow>> {
    let perr = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(file);
    let header = reader
        .headers()
        .map_err(|e| perr(1, e.to_string()))?
        .clone();
    let ncols = header.len();
    if ncols < 3 || &header[0] != "window_id" || &header[ncols - 1] != "label" {
        return Err(perr(1, "expected `window_id, <channels…>, label` header".into()));
    }
    let d = ncols - 2;
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();

    let mut windows: Vec<SequenceWindow> = Vec::new();
    let mut rows: Vec<f64> = Vec::new();
    let mut current: Option<(usize, usize)> = None;
    let flush = |windows: &mut Vec<SequenceWindow>, rows: &mut Vec<f64>, id: usize, label: usize| -> Result<()> {
        let t = rows.len() / d;
        windows.push(SequenceWindow {
            x: Matrix::from_vec(t, d, std::mem::take(rows))?,
            label,
            source: SourceSpan {
                recording: stem.clone(),
                start: id,
            },
            ground_truth: None,
        });
        Ok(())
    };
    for rec in reader.records() {
        let rec = rec.map_err(|e| perr(e.position().map_or(0, |p| p.line() as usize), e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() != ncols {
            return Err(perr(line, format!("expected {ncols} columns, found {}", rec.len())));
        }
        let id: usize = rec[0]
            .parse()
            .map_err(|_| perr(line, format!("bad window id `{}`", &rec[0])))?;
        let label: usize = rec[ncols - 1]
            .parse()
            .ok()
            .filter(|&l| l < classes)
            .ok_or_else(|| perr(line, format!("unknown label `{}`", &rec[ncols - 1])))?;
        match current {
            Some((cid, clabel)) if cid != id => {
                if id != cid + 1 {
                    return Err(perr(line, format!("window id {id} follows {cid}")));
                }
                flush(&mut windows, &mut rows, cid, clabel)?;
                current = Some((id, label));
            }
            Some((_, clabel)) if clabel != label => {
                return Err(perr(line, format!("label changes inside window {id}")));
            }
            None if id != 0 => return Err(perr(line, "first window id must be 0".into())),
            _ => current = Some((id, label)),
        }
        for cell in rec.iter().skip(1).take(d) {
            let v: f64 = cell
                .parse()
                .map_err(|_| perr(line, format!("non-numeric value `{cell}`")))?;
            rows.push(v);
        }
    }
    if let Some((id, label)) = current {
        flush(&mut windows, &mut rows, id, label)?;
    }
    if let Some(w) = windows.iter().find(|w| w.x.rows() != windows[0].x.rows()) {
        return Err(perr(
            0,
            format!("window {} has a different length from window 0", w.source.start),
        ));
    }
    Ok(windows)
}
