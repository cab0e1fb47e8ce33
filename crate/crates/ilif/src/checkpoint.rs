//! Versioned JSON checkpoints.
//!
//! Layout (schema version 1): layer shapes, neuron parameters, the optional
//! trained decay logit, and the weights as base64-encoded little-endian
//! 64-bit floats in row-major order, plus the seed the run used.

use crate::linalg::Matrix;
use crate::network::{DenseSpikingLayer, SpikingNetwork};
use crate::neuron::NeuronParams;
use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

pub const CHECKPOINT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("cannot access checkpoint {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("checkpoint parse error: {0}")]
    Parse(String),
    #[error("unsupported checkpoint schema version {0} (this build reads {CHECKPOINT_SCHEMA_VERSION})")]
    Version(u32),
    #[error("layer {layer}: weight payload holds {actual} floats, shape wants {expected}")]
    WeightSize {
        layer: usize,
        expected: usize,
        actual: usize,
    },
    #[error("layer {layer}: invalid base64 weights: {message}")]
    Decode { layer: usize, message: String },
}

#[derive(Serialize, Deserialize)]
struct LayerRecord {
    in_size: usize,
    out_size: usize,
    params: NeuronParams,
    decay_logit: Option<f64>,
    weights_b64: String,
}

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    schema_version: u32,
    seed: u64,
    layers: Vec<LayerRecord>,
}

fn encode_weights(weights: &Matrix) -> String {
    let mut bytes = Vec::with_capacity(weights.data().len() * 8);
    for v in weights.data() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    BASE64.encode(bytes)
}

fn decode_weights(
    layer: usize,
    b64: &str,
    rows: usize,
    cols: usize,
) -> Result<Matrix, CheckpointError> {
    let bytes = BASE64.decode(b64).map_err(|e| CheckpointError::Decode {
        layer,
        message: e.to_string(),
    })?;
    if bytes.len() % 8 != 0 || bytes.len() / 8 != rows * cols {
        return Err(CheckpointError::WeightSize {
            layer,
            expected: rows * cols,
            actual: bytes.len() / 8,
        });
    }
    let data = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(Matrix::from_vec(rows, cols, data))
}

/// Serialize a network (plus the seed that produced it) to checkpoint JSON.
pub fn to_json(net: &SpikingNetwork, seed: u64) -> String {
    let file = CheckpointFile {
        schema_version: CHECKPOINT_SCHEMA_VERSION,
        seed,
        layers: net
            .layers
            .iter()
            .map(|l| LayerRecord {
                in_size: l.in_size(),
                out_size: l.out_size(),
                params: l.params,
                decay_logit: l.decay_logit,
                weights_b64: encode_weights(&l.weights),
            })
            .collect(),
    };
    let mut text = serde_json::to_string_pretty(&file).expect("checkpoint serializes");
    text.push('\n');
    text
}

pub fn from_json(text: &str) -> Result<(SpikingNetwork, u64), CheckpointError> {
    let file: CheckpointFile =
        serde_json::from_str(text).map_err(|e| CheckpointError::Parse(e.to_string()))?;
    if file.schema_version != CHECKPOINT_SCHEMA_VERSION {
        return Err(CheckpointError::Version(file.schema_version));
    }
    let mut layers = Vec::with_capacity(file.layers.len());
    for (i, rec) in file.layers.iter().enumerate() {
        let weights = decode_weights(i, &rec.weights_b64, rec.out_size, rec.in_size)?;
        layers.push(DenseSpikingLayer {
            weights,
            params: rec.params,
            decay_logit: rec.decay_logit,
        });
    }
    Ok((SpikingNetwork { layers }, file.seed))
}

pub fn save(net: &SpikingNetwork, seed: u64, path: impl AsRef<Path>) -> Result<(), CheckpointError> {
    let path = path.as_ref();
    std::fs::write(path, to_json(net, seed)).map_err(|source| CheckpointError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load(path: impl AsRef<Path>) -> Result<(SpikingNetwork, u64), CheckpointError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| CheckpointError::Io {
        path: path.display().to_string(),
        source,
    })?;
    from_json(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_preserves_weights_bit_exactly() {
        let net = SpikingNetwork::new(5, &[4, 3], NeuronParams::ilif(), 77).unwrap();
        let (loaded, seed) = from_json(&to_json(&net, 1234)).unwrap();
        assert_eq!(seed, 1234);
        assert_eq!(loaded.layers.len(), net.layers.len());
        for (a, b) in loaded.layers.iter().zip(&net.layers) {
            assert_eq!(a.weights, b.weights);
            assert_eq!(a.params, b.params);
            assert_eq!(a.decay_logit, b.decay_logit);
        }
    }

    #[test]
    fn version_mismatch_rejected() {
        let net = SpikingNetwork::new(2, &[2], NeuronParams::lif(), 1).unwrap();
        let text = to_json(&net, 1).replace("\"schema_version\": 1", "\"schema_version\": 9");
        assert!(matches!(from_json(&text), Err(CheckpointError::Version(9))));
    }

    #[test]
    fn corrupted_payload_rejected() {
        let net = SpikingNetwork::new(2, &[2], NeuronParams::lif(), 1).unwrap();
        let json = to_json(&net, 1);
        let tampered = json.replace("\"in_size\": 2", "\"in_size\": 3");
        assert!(matches!(
            from_json(&tampered),
            Err(CheckpointError::WeightSize { .. })
        ));
    }

    #[test]
    fn file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        let net = SpikingNetwork::new(3, &[2], NeuronParams::ilif(), 9).unwrap();
        save(&net, 42, &path).unwrap();
        let (loaded, seed) = load(&path).unwrap();
        assert_eq!(seed, 42);
        assert_eq!(loaded.layers[0].weights, net.layers[0].weights);
    }
}
