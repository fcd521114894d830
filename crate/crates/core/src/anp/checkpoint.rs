use std::path::Path;

use serde::{Deserialize, Serialize};

use super::weights::{AnpWeights, Hyperparams};
use crate::error::{Error, Result};
use crate::grad::Tensor;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"ANPCKPT1";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("not a checkpoint: bad magic bytes")]
    BadMagic,
    #[error("checkpoint format version {found} is not supported (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error("checkpoint truncated: need {needed} bytes, found {available}")]
    Truncated { needed: usize, available: usize },
    #[error("checkpoint manifest: {0}")]
    Manifest(String),
    #[error("checkpoint tensor {name} has shape {found:?}, expected {expected:?}")]
    Shape {
        name: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    #[error("checkpoint is missing tensor {0}")]
    MissingTensor(String),
    #[error("checkpoint has unexpected tensor {0}")]
    UnexpectedTensor(String),
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    format_version: u32,
    hyperparams: Hyperparams,
    tensors: Vec<Entry>,
}

#[derive(Serialize, Deserialize)]
struct Entry {
    name: String,
    shape: Vec<usize>,
    /// Byte offset into the data section.
    offset: usize,
}

/// Serializes weights: magic, manifest length (u64 LE), JSON manifest,
/// then little-endian `f32` buffers in manifest order.
pub fn checkpoint_bytes(weights: &AnpWeights) -> Vec<u8> {
    let mut offset = 0;
    let mut entries = Vec::new();
    for (name, t) in weights.names().iter().zip(weights.tensors()) {
        entries.push(Entry {
            name: name.clone(),
            shape: t.shape().to_vec(),
            offset,
        });
        offset += 4 * t.numel();
    }
    let manifest = Manifest {
        format_version: CHECKPOINT_VERSION,
        hyperparams: *weights.hyperparams(),
        tensors: entries,
    };
    let json = serde_json::to_vec(&manifest).expect("manifest serializes");
    let mut out = Vec::with_capacity(16 + json.len() + offset);
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    for t in weights.tensors() {
        for &v in t.data() {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    out
}

fn take(bytes: &[u8], start: usize, len: usize) -> Result<&[u8], CheckpointError> {
    let end = start.checked_add(len).ok_or(CheckpointError::Truncated {
        needed: usize::MAX,
        available: bytes.len(),
    })?;
    bytes.get(start..end).ok_or(CheckpointError::Truncated {
        needed: end,
        available: bytes.len(),
    })
}

pub fn parse_checkpoint(bytes: &[u8]) -> Result<AnpWeights, CheckpointError> {
    if bytes.len() < 8 || &bytes[..8] != CHECKPOINT_MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let len_bytes: [u8; 8] = take(bytes, 8, 8)?.try_into().expect("eight bytes");
    let json_len = usize::try_from(u64::from_le_bytes(len_bytes))
        .map_err(|_| CheckpointError::Manifest("manifest length overflows".into()))?;
    let json = take(bytes, 16, json_len)?;
    let value: serde_json::Value =
        serde_json::from_slice(json).map_err(|e| CheckpointError::Manifest(e.to_string()))?;
    let found = value
        .get("format_version")
        .and_then(serde_json::Value::as_u64)
        .ok_or_else(|| CheckpointError::Manifest("missing format_version".into()))?;
    if found != u64::from(CHECKPOINT_VERSION) {
        return Err(CheckpointError::Version {
            found: found.min(u64::from(u32::MAX)) as u32,
            expected: CHECKPOINT_VERSION,
        });
    }
    let manifest: Manifest =
        serde_json::from_value(value).map_err(|e| CheckpointError::Manifest(e.to_string()))?;
    manifest
        .hyperparams
        .validate()
        .map_err(|e| CheckpointError::Manifest(e.to_string()))?;
    let data = &bytes[16 + json_len..];

    let layout = manifest.hyperparams.layout();
    if let Some(extra) = manifest
        .tensors
        .iter()
        .find(|e| !layout.iter().any(|(n, _)| *n == e.name))
    {
        return Err(CheckpointError::UnexpectedTensor(extra.name.clone()));
    }
    let mut named = Vec::with_capacity(layout.len());
    for (name, shape) in layout {
        let entry = manifest
            .tensors
            .iter()
            .find(|e| e.name == name)
            .ok_or_else(|| CheckpointError::MissingTensor(name.clone()))?;
        if entry.shape != shape {
            return Err(CheckpointError::Shape {
                name,
                expected: shape,
                found: entry.shape.clone(),
            });
        }
        let numel: usize = shape.iter().product();
        let raw = take(data, entry.offset, 4 * numel).map_err(|e| match e {
            CheckpointError::Truncated { needed, available } => CheckpointError::Truncated {
                needed: needed + 16 + json_len,
                available: available + 16 + json_len,
            },
            other => other,
        })?;
        let values = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("four bytes")) as f64)
            .collect();
        let tensor = Tensor::new(shape, values).expect("shape checked");
        named.push((name, tensor));
    }
    AnpWeights::from_named(manifest.hyperparams, named)
        .map_err(|e| CheckpointError::Manifest(e.to_string()))
}

pub fn save_checkpoint(weights: &AnpWeights, path: &Path) -> Result<()> {
    std::fs::write(path, checkpoint_bytes(weights)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<AnpWeights> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(parse_checkpoint(&bytes)?)
}
