//! Binary checkpoint container.
//!
//! ```text
//! magic    8 bytes  "LIBUCKPT"
//! version  u32 LE
//! hlen     u64 LE   length of the JSON header
//! header   hlen bytes of UTF-8 JSON: config, vocabulary, tensor table
//! payload  f64 LE values of every tensor, in header order
//! ```
//!
//! Values are stored as raw bits, so save → load → save is byte-identical.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::ModelConfig;
use super::lora::LoraAdapter;
use super::transformer::Model;
use crate::data::Vocabulary;
use crate::diffcore::Tensor;
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"LIBUCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    config: ModelConfig,
    vocabulary: Option<Vocabulary>,
    tensors: Vec<TensorEntry>,
}

#[derive(Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    rows: usize,
    cols: usize,
}

/// A model plus the vocabulary it was trained with.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub model: Model,
    pub vocabulary: Option<Vocabulary>,
}

impl Checkpoint {
    pub fn new(model: Model, vocabulary: Option<Vocabulary>) -> Self {
        Checkpoint { model, vocabulary }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let m = &self.model;
        let mut tensors: Vec<(String, &Tensor)> = m.base_tensors().map(|(n, t)| (n.to_string(), t)).collect();
        for a in m.adapters() {
            tensors.push((format!("{}.lora_down", a.name()), &a.down));
            tensors.push((format!("{}.lora_up", a.name()), &a.up));
        }
        let header = Header {
            config: m.config().clone(),
            vocabulary: self.vocabulary.clone(),
            tensors: tensors
                .iter()
                .map(|(name, t)| TensorEntry {
                    name: name.clone(),
                    rows: t.rows(),
                    cols: t.cols(),
                })
                .collect(),
        };
        let header = serde_json::to_vec(&header)?;
        let payload: usize = tensors.iter().map(|(_, t)| t.len() * 8).sum();
        let mut out = Vec::with_capacity(8 + 4 + 8 + header.len() + payload);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(&header);
        for (_, t) in &tensors {
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::Checkpoint(m.to_string());
        if bytes.len() < 20 || &bytes[..8] != MAGIC {
            return Err(bad("not a checkpoint file"));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
        if version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {version}")));
        }
        let hlen = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes")) as usize;
        let body = &bytes[20..];
        if body.len() < hlen {
            return Err(bad("truncated header"));
        }
        let header: Header = serde_json::from_slice(&body[..hlen])?;
        let mut payload = &body[hlen..];
        let mut tensors = Vec::with_capacity(header.tensors.len());
        for e in &header.tensors {
            let n = e.rows * e.cols;
            if payload.len() < n * 8 {
                return Err(Error::Checkpoint(format!("truncated tensor {}", e.name)));
            }
            let data = payload[..n * 8]
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect();
            payload = &payload[n * 8..];
            tensors.push(Tensor::matrix(e.rows, e.cols, data)?);
        }
        if !payload.is_empty() {
            return Err(bad("trailing bytes after payload"));
        }
        let config = header.config;
        let n_adapters = if config.lora_enabled {
            config.n_layers * config.lora_targets.len()
        } else {
            0
        };
        if tensors.len() < 2 * n_adapters {
            return Err(bad("missing adapter tensors"));
        }
        let adapter_tensors = tensors.split_off(tensors.len() - 2 * n_adapters);
        let mut adapters = Vec::with_capacity(n_adapters);
        let mut it = adapter_tensors.into_iter();
        for layer in 0..config.n_layers {
            for &target in &config.lora_targets {
                if !config.lora_enabled {
                    break;
                }
                let down = it.next().ok_or_else(|| bad("missing adapter"))?;
                let up = it.next().ok_or_else(|| bad("missing adapter"))?;
                adapters.push(LoraAdapter {
                    layer,
                    target,
                    down,
                    up,
                    scaling: config.lora_scaling(),
                });
            }
        }
        let model = Model::from_parts(config, tensors, adapters)?;
        Ok(Checkpoint {
            model,
            vocabulary: header.vocabulary,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}
