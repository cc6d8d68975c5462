//! Parameter checkpoints: a raw little-endian `f64` blob plus a JSON sidecar
//! listing tensor names and shapes in serialization order.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::network::{ModelConfig, Params};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub dtype: String,
    pub model: ModelConfig,
    pub tensors: Vec<TensorEntry>,
}

/// Path of the sidecar belonging to a blob.
pub fn sidecar_path(blob: &Path) -> PathBuf {
    blob.with_extension("json")
}

pub fn save_checkpoint(blob: impl AsRef<Path>, config: &ModelConfig, params: &Params) -> Result<()> {
    let blob = blob.as_ref();
    let mut bytes = Vec::with_capacity(params.len() * 8);
    for buf in params.buffers() {
        for v in buf {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    let sidecar = Sidecar {
        dtype: "f64-le".into(),
        model: config.clone(),
        tensors: params
            .layout()
            .into_iter()
            .map(|(name, shape)| TensorEntry { name, shape })
            .collect(),
    };
    fs::write(blob, bytes).map_err(|e| Error::io(blob, e))?;
    let side = sidecar_path(blob);
    let text = serde_json::to_string_pretty(&sidecar)?;
    fs::write(&side, text + "\n").map_err(|e| Error::io(&side, e))
}

pub fn load_checkpoint(blob: impl AsRef<Path>) -> Result<(ModelConfig, Params)> {
    let blob = blob.as_ref();
    let side = sidecar_path(blob);
    let text = fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
    let sidecar: Sidecar = serde_json::from_str(&text)?;
    if sidecar.dtype != "f64-le" {
        return Err(Error::format(&side, format!("unsupported dtype {}", sidecar.dtype)));
    }
    sidecar.model.validate()?;
    let mut params = Params::zeros(&sidecar.model);
    let expected: Vec<TensorEntry> = params
        .layout()
        .into_iter()
        .map(|(name, shape)| TensorEntry { name, shape })
        .collect();
    if expected != sidecar.tensors {
        return Err(Error::format(
            &side,
            "tensor list does not match the model configuration",
        ));
    }
    let bytes = fs::read(blob).map_err(|e| Error::io(blob, e))?;
    if bytes.len() != params.len() * 8 {
        return Err(Error::format(
            blob,
            format!("expected {} bytes, found {}", params.len() * 8, bytes.len()),
        ));
    }
    let mut chunks = bytes.chunks_exact(8);
    for buf in params.buffers_mut() {
        for v in buf.iter_mut() {
            *v = f64::from_le_bytes(chunks.next().expect("length checked").try_into().expect("8 bytes"));
        }
    }
    Ok((sidecar.model, params))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ModelConfig {
            channels: [2, 3, 4, 5],
            ..ModelConfig::default()
        };
        let p = Params::init(&cfg, 11).unwrap();
        let path = dir.path().join("model.bin");
        save_checkpoint(&path, &cfg, &p).unwrap();
        let (cfg2, p2) = load_checkpoint(&path).unwrap();
        assert_eq!(cfg, cfg2);
        assert_eq!(p, p2);
    }

    #[test]
    fn truncated_blob_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ModelConfig::default();
        let path = dir.path().join("model.bin");
        save_checkpoint(&path, &cfg, &Params::init(&cfg, 1).unwrap()).unwrap();
        let bytes = fs::read(&path).unwrap();
        fs::write(&path, &bytes[..bytes.len() - 8]).unwrap();
        assert!(matches!(load_checkpoint(&path), Err(Error::Format { .. })));
    }
}
