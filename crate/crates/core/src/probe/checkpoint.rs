//! Model checkpoints: a length-prefixed JSON header followed by float32
//! little-endian weight blocks (w1, b1, w2, b2, then encoder tensors).

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::{ProbeParams, TrainConfig, TrainedModel};
use crate::encoder::{ToyEncoderConfig, ToyEncoderParams};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub dim: usize,
    pub hidden_dim: usize,
    /// `toy` or `file:<path>`.
    pub backend: String,
    pub seed: u64,
    pub config: TrainConfig,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub encoder: Option<ToyEncoderConfig>,
    /// Free-form run description (corpora, language).
    #[serde(default)]
    pub source: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub header: CheckpointHeader,
    pub model: TrainedModel,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = serde_json::to_vec(&self.header)?;
        let mut out = Vec::new();
        out.extend_from_slice(&(header.len() as u32).to_le_bytes());
        out.extend_from_slice(&header);
        let probe = self.model.probe.tensors();
        let enc = self.model.encoder.as_ref().map(|e| e.tensors()).unwrap_or_default();
        for t in probe.iter().chain(enc.iter()) {
            for &v in t.iter() {
                out.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: String| Error::Checkpoint(m);
        if bytes.len() < 4 {
            return Err(bad("truncated header length".into()));
        }
        let hlen = u32::from_le_bytes(bytes[..4].try_into().unwrap()) as usize;
        let header_bytes = bytes
            .get(4..4 + hlen)
            .ok_or_else(|| bad("truncated header".into()))?;
        let header: CheckpointHeader = serde_json::from_slice(header_bytes)?;
        let body = &bytes[4 + hlen..];
        if !body.len().is_multiple_of(4) {
            return Err(bad("weight section is not a whole number of floats".into()));
        }
        let mut values = body
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64);
        let mut take = |n: usize, what: &str| -> Result<Vec<f64>> {
            let v: Vec<f64> = values.by_ref().take(n).collect();
            if v.len() != n {
                return Err(bad(format!("truncated {} block", what)));
            }
            Ok(v)
        };

        let (d, h) = (header.dim, header.hidden_dim);
        let shape_err = |e: ndarray::ShapeError| bad(e.to_string());
        let probe = ProbeParams {
            w1: Array2::from_shape_vec((h, d), take(h * d, "w1")?).map_err(shape_err)?,
            b1: Array1::from(take(h, "b1")?),
            w2: Array2::from_shape_vec((2, h), take(2 * h, "w2")?).map_err(shape_err)?,
            b2: Array1::from(take(2, "b2")?),
        };
        let encoder = match header.encoder {
            None => None,
            Some(cfg) => {
                cfg.validate()?;
                let tensors = tensor_sizes(cfg)
                    .iter()
                    .map(|&n| take(n, "encoder"))
                    .collect::<Result<Vec<_>>>()?;
                Some(ToyEncoderParams::from_tensors(cfg, header.seed, &tensors)?)
            }
        };
        if values.next().is_some() {
            return Err(bad("trailing data after weights".into()));
        }
        Ok(Checkpoint {
            header,
            model: TrainedModel { probe, encoder },
        })
    }
}

fn tensor_sizes(cfg: ToyEncoderConfig) -> Vec<usize> {
    let d = cfg.dim;
    let mut out = vec![cfg.vocab_hash_buckets * d];
    for _ in 0..cfg.n_layers {
        out.extend([d * d, d * d, d * d, d * d, d * 4 * d, 4 * d, 4 * d * d, d]);
    }
    out
}

pub fn write_checkpoint(ck: &Checkpoint, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, ck.to_bytes()?)?;
    Ok(())
}

pub fn read_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    Checkpoint::from_bytes(&fs::read(path)?)
}
