//! Binary checkpoint format (all integers and floats little-endian):
//!
//! ```text
//! "ATTN"                      magic
//! u32                         format version
//! u64                         metadata length in bytes
//! [u8]                        metadata, UTF-8 JSON
//! u32                         tensor count
//! repeated:
//!   u32, [u8]                 name length, name
//!   u32                       rank
//!   u64 × rank                dims
//!   f64 × Π dims              values, row-major
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{LossConfig, ModelDims, ModelParams, Variant};
use crate::numerics::Matrix;

pub const MAGIC: &[u8; 4] = b"ATTN";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("not a checkpoint: bad magic bytes {found:?}")]
    BadMagic { found: Vec<u8> },
    #[error("unsupported checkpoint version {found} (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("checkpoint truncated while reading {what}")]
    Truncated { what: String },
    #[error("malformed checkpoint: {0}")]
    Malformed(String),
    #[error("checkpoint shape mismatch for {what}: checkpoint has {found}, expected {expected}")]
    ShapeMismatch {
        what: String,
        expected: String,
        found: String,
    },
}

/// Everything needed to rebuild and interpret a model besides its tensors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub dims: ModelDims,
    pub variant: Variant,
    pub modality_map: Vec<usize>,
    pub lambda1: f64,
    pub lambda2: f64,
    #[serde(default)]
    pub class_names: Vec<String>,
}

impl CheckpointMeta {
    pub fn loss_config(&self) -> LossConfig {
        LossConfig {
            variant: self.variant,
            lambda1: self.lambda1,
            lambda2: self.lambda2,
        }
    }
}

pub fn encode_checkpoint(params: &ModelParams, meta: &CheckpointMeta) -> Result<Vec<u8>> {
    let meta_json = serde_json::to_vec(meta)
        .map_err(|e| CheckpointError::Malformed(format!("metadata: {e}")))?;
    let tensors = params.tensors();
    let mut buf = Vec::with_capacity(64 + meta_json.len() + params.num_parameters() * 8);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(meta_json.len() as u64).to_le_bytes());
    buf.extend_from_slice(&meta_json);
    buf.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for (name, t) in tensors {
        buf.extend_from_slice(&(name.len() as u32).to_le_bytes());
        buf.extend_from_slice(name.as_bytes());
        buf.extend_from_slice(&2u32.to_le_bytes());
        buf.extend_from_slice(&(t.rows() as u64).to_le_bytes());
        buf.extend_from_slice(&(t.cols() as u64).to_le_bytes());
        for v in t.as_slice() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(buf)
}

pub fn save_checkpoint(path: &Path, params: &ModelParams, meta: &CheckpointMeta) -> Result<()> {
    let bytes = encode_checkpoint(params, meta)?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], CheckpointError> {
        if self.buf.len() - self.pos < n {
            return Err(CheckpointError::Truncated { what: what.into() });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64, CheckpointError> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn len(&mut self, what: &str) -> Result<usize, CheckpointError> {
        let v = self.u64(what)?;
        usize::try_from(v)
            .ok()
            .filter(|&n| n <= self.buf.len())
            .ok_or_else(|| CheckpointError::Truncated { what: what.into() })
    }
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<(ModelParams, CheckpointMeta), CheckpointError> {
    let mut r = Reader { buf: bytes, pos: 0 };
    let magic = r.take(4, "magic")?;
    if magic != MAGIC {
        return Err(CheckpointError::BadMagic {
            found: magic.to_vec(),
        });
    }
    let version = r.u32("version")?;
    if version != FORMAT_VERSION {
        return Err(CheckpointError::VersionMismatch {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let meta_len = r.len("metadata length")?;
    let meta_bytes = r.take(meta_len, "metadata")?;
    let meta: CheckpointMeta = serde_json::from_slice(meta_bytes)
        .map_err(|e| CheckpointError::Malformed(format!("metadata: {e}")))?;

    let mut params = ModelParams::zeros(&meta.dims, meta.variant, meta.modality_map.clone())
        .map_err(|e| CheckpointError::Malformed(e.to_string()))?;
    let expected_names: Vec<String> = params.tensors().into_iter().map(|(n, _)| n).collect();
    let count = r.u32("tensor count")? as usize;
    if count != expected_names.len() {
        return Err(CheckpointError::Malformed(format!(
            "{count} tensors stored, model layout has {}",
            expected_names.len()
        )));
    }
    let mut seen = vec![false; count];
    for _ in 0..count {
        let name_len = r.u32("tensor name length")? as usize;
        let name = std::str::from_utf8(r.take(name_len, "tensor name")?)
            .map_err(|_| CheckpointError::Malformed("tensor name is not UTF-8".into()))?
            .to_string();
        let rank = r.u32(&format!("{name} rank"))?;
        if rank != 2 {
            return Err(CheckpointError::Malformed(format!("{name} has rank {rank}")));
        }
        let rows = r.len(&format!("{name} dims"))?;
        let cols = r.len(&format!("{name} dims"))?;
        let idx = expected_names
            .iter()
            .position(|n| *n == name)
            .ok_or_else(|| CheckpointError::Malformed(format!("unexpected tensor {name}")))?;
        seen[idx] = true;
        let slot = params.tensor_mut(&name).expect("name came from layout");
        if slot.shape() != (rows, cols) {
            return Err(CheckpointError::ShapeMismatch {
                what: name,
                expected: format!("{:?}", slot.shape()),
                found: format!("{:?}", (rows, cols)),
            });
        }
        let raw = r.take(rows * cols * 8, &format!("{name} values"))?;
        let values = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        *slot = Matrix::from_vec(rows, cols, values)
            .map_err(|e| CheckpointError::Malformed(e.to_string()))?;
    }
    if let Some(i) = seen.iter().position(|s| !s) {
        return Err(CheckpointError::Malformed(format!(
            "tensor {} missing",
            expected_names[i]
        )));
    }
    if r.pos != bytes.len() {
        return Err(CheckpointError::Malformed(format!(
            "{} trailing bytes",
            bytes.len() - r.pos
        )));
    }
    Ok((params, meta))
}

pub fn load_checkpoint(path: &Path) -> Result<(ModelParams, CheckpointMeta)> {
    let bytes = fs::read(path).map_err(|e| Error::io(PathBuf::from(path), e))?;
    Ok(decode_checkpoint(&bytes)?)
}

/// Loads a checkpoint and checks it against the channel and class counts of
/// the data it will be applied to.
pub fn load_checkpoint_for(
    path: &Path,
    channels: usize,
    classes: usize,
) -> Result<(ModelParams, CheckpointMeta)> {
    let (params, meta) = load_checkpoint(path)?;
    check_compatible(&meta, channels, classes)?;
    Ok((params, meta))
}

pub fn check_compatible(meta: &CheckpointMeta, channels: usize, classes: usize) -> Result<(), CheckpointError> {
    if meta.dims.input != channels {
        return Err(CheckpointError::ShapeMismatch {
            what: "input channels".into(),
            expected: channels.to_string(),
            found: meta.dims.input.to_string(),
        });
    }
    if meta.dims.classes != classes {
        return Err(CheckpointError::ShapeMismatch {
            what: "classes".into(),
            expected: classes.to_string(),
            found: meta.dims.classes.to_string(),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::training::init_params;

    fn sample(d: usize) -> (ModelParams, CheckpointMeta) {
        let dims = ModelDims {
            input: d,
            hidden: 6,
            classes: 3,
            modalities: 3,
            sensor_hidden: 4,
            stacked: true,
            cell_bias: false,
        };
        let map = crate::model::contiguous_modality_map(d, 3);
        let params = init_params(17, &dims, Variant::TemporalSensor, map.clone()).unwrap();
        let meta = CheckpointMeta {
            dims,
            variant: Variant::TemporalSensor,
            modality_map: map,
            lambda1: 0.1,
            lambda2: 0.5,
            class_names: vec!["a".into(), "b".into(), "c".into()],
        };
        (params, meta)
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let (p, m) = sample(9);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        save_checkpoint(&path, &p, &m).unwrap();
        let (q, n) = load_checkpoint(&path).unwrap();
        assert_eq!(m, n);
        for ((na, a), (nb, b)) in p.tensors().into_iter().zip(q.tensors()) {
            assert_eq!(na, nb);
            let bits_a: Vec<u64> = a.as_slice().iter().map(|v| v.to_bits()).collect();
            let bits_b: Vec<u64> = b.as_slice().iter().map(|v| v.to_bits()).collect();
            assert_eq!(bits_a, bits_b);
        }
        assert_eq!(encode_checkpoint(&q, &n).unwrap(), fs::read(&path).unwrap());
    }

    #[test]
    fn corrupted_magic() {
        let (p, m) = sample(9);
        let mut bytes = encode_checkpoint(&p, &m).unwrap();
        bytes[0] = b'X';
        assert!(matches!(decode_checkpoint(&bytes), Err(CheckpointError::BadMagic { .. })));
    }

    #[test]
    fn version_mismatch() {
        let (p, m) = sample(9);
        let mut bytes = encode_checkpoint(&p, &m).unwrap();
        bytes[4..8].copy_from_slice(&99u32.to_le_bytes());
        assert!(matches!(
            decode_checkpoint(&bytes),
            Err(CheckpointError::VersionMismatch { found: 99, .. })
        ));
    }

    #[test]
    fn truncated_file() {
        let (p, m) = sample(9);
        let bytes = encode_checkpoint(&p, &m).unwrap();
        for cut in [2, 6, 20, bytes.len() - 3] {
            assert!(matches!(
                decode_checkpoint(&bytes[..cut]),
                Err(CheckpointError::Truncated { .. })
            ));
        }
    }

    #[test]
    fn wrong_channel_count_rejected_at_load() {
        let (p, m) = sample(9);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d9.ckpt");
        save_checkpoint(&path, &p, &m).unwrap();
        let err = load_checkpoint_for(&path, 52, 3).unwrap_err();
        assert!(matches!(
            err,
            Error::Checkpoint(CheckpointError::ShapeMismatch { .. })
        ));
        assert!(load_checkpoint_for(&path, 9, 3).is_ok());
    }

    #[test]
    fn tensor_shape_disagreeing_with_metadata() {
        let (p, mut m) = sample(9);
        let bytes_ok = encode_checkpoint(&p, &m).unwrap();
        assert!(decode_checkpoint(&bytes_ok).is_ok());
        m.dims.hidden = 7;
        let bytes = encode_checkpoint(&p, &m).unwrap();
        assert!(matches!(
            decode_checkpoint(&bytes),
            Err(CheckpointError::ShapeMismatch { .. })
        ));
    }
}
