use serde::{Deserialize, Serialize};

use super::recording::Recording;
use super::window::SequenceWindow;
use crate::error::{Error, Result};

/// Standard deviations below this are floored.
pub const STD_FLOOR: f64 = 1e-8;

/// Which split a set of statistics was computed on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
    Test,
}

/// Per-channel mean and standard deviation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub provenance: Split,
}

impl ChannelStats {
    fn from_columns<'a>(
        channels: usize,
        columns: impl Iterator<Item = (usize, &'a [f64])> + Clone,
        provenance: Split,
    ) -> Result<Self> {
        let mut sum = vec![0.0; channels];
        let mut count = vec![0usize; channels];
        for (ch, vals) in columns.clone() {
            for &v in vals.iter().filter(|v| !v.is_nan()) {
                sum[ch] += v;
                count[ch] += 1;
            }
        }
        if let Some(ch) = count.iter().position(|&c| c == 0) {
            return Err(Error::Data(format!("channel {ch} has no samples for statistics")));
        }
        let mean: Vec<f64> = sum.iter().zip(&count).map(|(s, &c)| s / c as f64).collect();
        let mut sq = vec![0.0; channels];
        for (ch, vals) in columns {
            for &v in vals.iter().filter(|v| !v.is_nan()) {
                sq[ch] += (v - mean[ch]).powi(2);
            }
        }
        let std = sq
            .iter()
            .zip(&count)
            .enumerate()
            .map(|(ch, (s, &c))| {
                let sd = (s / c as f64).sqrt();
                if sd < STD_FLOOR {
                    log::warn!("channel {ch} is (near) constant; std floored to {STD_FLOOR}");
                    STD_FLOOR
                } else {
                    sd
                }
            })
            .collect();
        Ok(ChannelStats {
            mean,
            std,
            provenance,
        })
    }
}

/// Population statistics over every sample of `recordings`.
pub fn compute_stats(recordings: &[Recording], provenance: Split) -> Result<ChannelStats> {
    let channels = recordings
        .first()
        .map(|r| r.num_channels())
        .ok_or_else(|| Error::Data("no recordings to compute statistics on".into()))?;
    if recordings.iter().any(|r| r.num_channels() != channels) {
        return Err(Error::Data("recordings disagree on channel count".into()));
    }
    let cols = recordings
        .iter()
        .flat_map(|r| r.channels.iter().enumerate().map(|(i, c)| (i, c.as_slice())));
    ChannelStats::from_columns(channels, cols, provenance)
}

/// Statistics over every timestep of pre-cut windows.
pub fn compute_window_stats(windows: &[SequenceWindow], provenance: Split) -> Result<ChannelStats> {
    let first = windows
        .first()
        .ok_or_else(|| Error::Data("no windows to compute statistics on".into()))?;
    let d = first.x.cols();
    let columns: Vec<Vec<f64>> = (0..d)
        .map(|ch| windows.iter().flat_map(|w| w.x.column(ch)).collect())
        .collect();
    ChannelStats::from_columns(
        d,
        columns.iter().enumerate().map(|(i, c)| (i, c.as_slice())),
        provenance,
    )
}

fn check_stats(stats: &ChannelStats, channels: usize) -> Result<()> {
    if stats.provenance != Split::Train {
        return Err(Error::Data(format!(
            "standardization statistics must come from the training split, got {:?}",
            stats.provenance
        )));
    }
    if stats.mean.len() != channels {
        return Err(Error::Data(format!(
            "statistics cover {} channels, data has {channels}",
            stats.mean.len()
        )));
    }
    Ok(())
}

/// `(x − mean) / std` per channel.
pub fn standardize(rec: &Recording, stats: &ChannelStats) -> Result<Recording> {
    check_stats(stats, rec.num_channels())?;
    let mut out = rec.clone();
    for (ch, vals) in out.channels.iter_mut().enumerate() {
        let (m, s) = (stats.mean[ch], stats.std[ch].max(STD_FLOOR));
        vals.iter_mut().for_each(|v| *v = (*v - m) / s);
    }
    Ok(out)
}

pub fn standardize_windows(windows: &mut [SequenceWindow], stats: &ChannelStats) -> Result<()> {
    let Some(first) = windows.first() else {
        return Ok(());
    };
    check_stats(stats, first.x.cols())?;
    for w in windows {
        for t in 0..w.x.rows() {
            for (ch, v) in w.x.row_mut(t).iter_mut().enumerate() {
                *v = (*v - stats.mean[ch]) / stats.std[ch].max(STD_FLOOR);
            }
        }
    }
    Ok(())
}
