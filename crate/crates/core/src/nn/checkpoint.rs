//! JSON checkpoints of named tensors.
//!
//! Layout:
//!
//! ```text
//! {
//!   "format_version": 1,
//!   "kind": "<free-form model tag>",
//!   "config": <any JSON value>,
//!   "tensors": [
//!     { "name": "lstm.w_x", "shape": [4, 3], "data": "<base64>" },
//!     ...
//!   ]
//! }
//! ```
//!
//! `data` is the standard base64 encoding of the tensor's values as
//! consecutive little-endian IEEE-754 binary64 words in row-major order, so
//! values round-trip bit for bit. Tensors appear in module visit order.

use std::path::Path;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};

use super::Module;
use crate::error::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub kind: String,
    pub config: serde_json::Value,
    pub tensors: Vec<NamedTensor>,
}

fn encode(values: &[f64]) -> String {
    let mut bytes = Vec::with_capacity(values.len() * 8);
    for v in values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    STANDARD.encode(bytes)
}

fn decode(s: &str) -> Result<Vec<f64>> {
    let bytes = STANDARD
        .decode(s)
        .map_err(|e| Error::Checkpoint(format!("bad base64: {e}")))?;
    if bytes.len() % 8 != 0 {
        return Err(Error::Checkpoint(format!("{} bytes is not a whole number of f64 values", bytes.len())));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect())
}

impl Checkpoint {
    pub fn capture<M: Module + ?Sized>(kind: &str, config: serde_json::Value, model: &M) -> Self {
        let mut tensors = Vec::new();
        model.visit("", &mut |name, p| {
            tensors.push(NamedTensor {
                name,
                shape: p.value.shape().to_vec(),
                data: encode(p.value.data()),
            })
        });
        Self {
            format_version: CHECKPOINT_VERSION,
            kind: kind.to_string(),
            config,
            tensors,
        }
    }

    /// Copy stored values into `model`; names, shapes and order must match.
    pub fn restore<M: Module + ?Sized>(&self, model: &mut M) -> Result<()> {
        if self.format_version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported format_version {}", self.format_version)));
        }
        let mut decoded = Vec::with_capacity(self.tensors.len());
        for t in &self.tensors {
            let data = decode(&t.data)?;
            if data.len() != t.shape.iter().product::<usize>() {
                return Err(Error::Checkpoint(format!("tensor {} has {} values for shape {:?}", t.name, data.len(), t.shape)));
            }
            decoded.push(data);
        }
        let mut i = 0;
        let mut err = None;
        model.visit_mut("", &mut |name, p| {
            if err.is_some() {
                return;
            }
            match self.tensors.get(i) {
                Some(t) if t.name == name && t.shape == p.value.shape() => {
                    p.value.data_mut().copy_from_slice(&decoded[i]);
                }
                Some(t) => {
                    err = Some(format!(
                        "expected {name} {:?}, found {} {:?}",
                        p.value.shape(),
                        t.name,
                        t.shape
                    ))
                }
                None => err = Some(format!("missing tensor {name}")),
            }
            i += 1;
        });
        if let Some(e) = err {
            return Err(Error::Checkpoint(e));
        }
        if i != self.tensors.len() {
            return Err(Error::Checkpoint(format!("{} stored tensors, model has {i}", self.tensors.len())));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
