//! Self-describing binary checkpoints.
//!
//! Layout: an 8-byte magic, a little-endian u32 format version, a
//! little-endian u64 header length, a JSON header (model config, training
//! step, tensor directory: name / dtype / shape), then each tensor's data as
//! raw little-endian f32 in directory order. Everything needed to rebuild
//! the model travels in the file; a version mismatch is a hard error, never
//! a best-effort read. Writes go through a temp file and rename, so a
//! checkpoint path never holds a torn file.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::ModelConfig;
use crate::error::TinyLmError;
use crate::params::Parameters;

const MAGIC: &[u8; 8] = b"TLMCKPT\0";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct TensorMeta {
    name: String,
    dtype: String,
    shape: Vec<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    config: ModelConfig,
    step: u64,
    /// Reserved: no optimizer state is persisted yet, the field keeps the
    /// layout forward-compatible.
    optimizer_state: Option<serde_json::Value>,
    tensors: Vec<TensorMeta>,
}

/// Serializes parameters and step count to `path` atomically.
pub fn save_checkpoint(
    params: &Parameters<f32>,
    step: u64,
    path: &Path,
) -> Result<(), TinyLmError> {
    if let Some(name) = params.first_non_finite() {
        return Err(TinyLmError::NonFiniteTensor(name));
    }
    let tensors = params.named_tensors();
    let header = Header {
        config: params.config.clone(),
        step,
        optimizer_state: None,
        tensors: tensors
            .iter()
            .map(|t| TensorMeta {
                name: t.name.clone(),
                dtype: "f32".into(),
                shape: t.shape.clone(),
            })
            .collect(),
    };
    let header_bytes = serde_json::to_vec(&header).expect("header serializes");

    let payload_len: usize = tensors.iter().map(|t| t.data.len() * 4).sum();
    let mut bytes = Vec::with_capacity(8 + 4 + 8 + header_bytes.len() + payload_len);
    bytes.extend_from_slice(MAGIC);
    bytes.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    bytes.extend_from_slice(&(header_bytes.len() as u64).to_le_bytes());
    bytes.extend_from_slice(&header_bytes);
    for tensor in &tensors {
        for &value in tensor.data {
            bytes.extend_from_slice(&value.to_le_bytes());
        }
    }
    ual_core::atomic_write(path, &bytes)?;
    Ok(())
}

/// Loads a checkpoint, verifying magic, version, directory, and finiteness.
pub fn load_checkpoint(path: &Path) -> Result<(Parameters<f32>, u64), TinyLmError> {
    let bytes = std::fs::read(path)?;
    let fail = |msg: &str| TinyLmError::CheckpointFormat(format!("{}: {msg}", path.display()));

    if bytes.len() < 20 {
        return Err(fail("file shorter than the fixed preamble"));
    }
    if &bytes[..8] != MAGIC {
        return Err(fail("bad magic — not a checkpoint file"));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    if version != FORMAT_VERSION {
        return Err(TinyLmError::CheckpointVersion {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let header_len = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes")) as usize;
    let payload_start = 20 + header_len;
    if bytes.len() < payload_start {
        return Err(fail("header length exceeds the file"));
    }
    let header: Header = serde_json::from_slice(&bytes[20..payload_start])
        .map_err(|e| fail(&format!("header does not parse: {e}")))?;
    header
        .config
        .validate()
        .map_err(|e| fail(&format!("embedded config invalid: {e}")))?;

    let mut params = Parameters::<f32>::zeros(&header.config);
    let mut offset = payload_start;
    {
        let tensors = params.named_tensors_mut();
        if tensors.len() != header.tensors.len() {
            return Err(fail(&format!(
                "directory lists {} tensors, model wants {}",
                header.tensors.len(),
                tensors.len()
            )));
        }
        for (tensor, meta) in tensors.into_iter().zip(&header.tensors) {
            if meta.name != tensor.name || meta.shape != tensor.shape {
                return Err(fail(&format!(
                    "directory entry {} {:?} does not match expected {} {:?}",
                    meta.name, meta.shape, tensor.name, tensor.shape
                )));
            }
            if meta.dtype != "f32" {
                return Err(fail(&format!("tensor {} has dtype {}", meta.name, meta.dtype)));
            }
            let len = tensor.data.len() * 4;
            if bytes.len() < offset + len {
                return Err(fail(&format!("payload truncated in tensor {}", meta.name)));
            }
            for (i, value) in tensor.data.iter_mut().enumerate() {
                let at = offset + i * 4;
                *value = f32::from_le_bytes(bytes[at..at + 4].try_into().expect("4 bytes"));
            }
            offset += len;
        }
    }
    if offset != bytes.len() {
        return Err(fail("trailing bytes after the last tensor"));
    }
    if let Some(name) = params.first_non_finite() {
        return Err(TinyLmError::NonFiniteTensor(name));
    }
    Ok((params, header.step))
}
