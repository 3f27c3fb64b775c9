//! Named-tensor weight container and its little-endian file format.
//!
//! Layout:
//!
//! ```text
//! magic      8 bytes   "SRSADWT\0"
//! version    u32       FORMAT_VERSION
//! header_len u32       byte length of the JSON header
//! header     bytes     UTF-8 JSON (StoreHeader)
//! count      u32       number of tensors
//! per tensor:
//!   name_len u32, name bytes (UTF-8)
//!   rank     u32, dims u64 × rank
//!   values   f64 × prod(dims)
//! ```

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{Architecture, ModelConfig};
use super::params::NetworkParams;
use crate::dsp::MelSpectrogram;
use crate::{Result, SadError};

pub const MAGIC: &[u8; 8] = b"SRSADWT\0";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoreHeader {
    pub format_version: u32,
    pub architecture: Architecture,
    pub model: ModelConfig,
    pub feature_config_hash: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

/// Serialized form of a network: header plus named tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightStore {
    pub header: StoreHeader,
    pub tensors: BTreeMap<String, Tensor>,
}

impl WeightStore {
    pub fn from_params(params: &NetworkParams, feature_config_hash: &str) -> Self {
        let tensors = params
            .tensor_specs()
            .into_iter()
            .zip(params.slices())
            .map(|(spec, values)| (spec.name, Tensor { shape: spec.shape, values: values.to_vec() }))
            .collect();
        Self {
            header: StoreHeader {
                format_version: FORMAT_VERSION,
                architecture: params.config.architecture,
                model: params.config.clone(),
                feature_config_hash: feature_config_hash.to_string(),
            },
            tensors,
        }
    }

    pub fn config(&self) -> &ModelConfig {
        &self.header.model
    }

    /// Builds typed parameters, checking every tensor against the header config.
    pub fn to_params(&self) -> Result<NetworkParams> {
        let cfg = &self.header.model;
        cfg.validate().map_err(|e| SadError::IncompatibleWeights(e.to_string()))?;
        if cfg.architecture != self.header.architecture {
            return Err(SadError::IncompatibleWeights("architecture disagrees with model config".into()));
        }
        let mut params = NetworkParams::zeros(cfg);
        let specs = params.tensor_specs();
        if specs.len() != self.tensors.len() {
            return Err(SadError::IncompatibleWeights(format!(
                "expected {} tensors, found {}",
                specs.len(),
                self.tensors.len()
            )));
        }
        for (spec, slot) in specs.iter().zip(params.slices_mut()) {
            let t = self
                .tensors
                .get(&spec.name)
                .ok_or_else(|| SadError::IncompatibleWeights(format!("missing tensor {}", spec.name)))?;
            if t.shape != spec.shape || t.values.len() != slot.len() {
                return Err(SadError::IncompatibleWeights(format!(
                    "{}: shape {:?}, expected {:?}",
                    spec.name, t.shape, spec.shape
                )));
            }
            if t.values.iter().any(|v| !v.is_finite()) {
                return Err(SadError::IncompatibleWeights(format!("{} holds non-finite values", spec.name)));
            }
            slot.copy_from_slice(&t.values);
        }
        Ok(params)
    }

    /// Fails unless these weights instantiate `expected`.
    pub fn check_compatible(&self, expected: &ModelConfig) -> Result<()> {
        if &self.header.model != expected {
            return Err(SadError::IncompatibleWeights(format!(
                "weights are for {} c={}, requested {} c={}",
                self.header.model.architecture, self.header.model.body.c, expected.architecture, expected.body.c
            )));
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&self.header.format_version.to_le_bytes());
        let header = serde_json::to_vec(&self.header).expect("header serializes");
        out.extend_from_slice(&(header.len() as u32).to_le_bytes());
        out.extend_from_slice(&header);
        out.extend_from_slice(&(self.tensors.len() as u32).to_le_bytes());
        for (name, t) in &self.tensors {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&(t.shape.len() as u32).to_le_bytes());
            for &d in &t.shape {
                out.extend_from_slice(&(d as u64).to_le_bytes());
            }
            for &v in &t.values {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err(SadError::CorruptWeights("bad magic bytes".into()));
        }
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(SadError::CorruptWeights(format!(
                "format version {version}, this build reads {FORMAT_VERSION}"
            )));
        }
        let header_len = r.u32()? as usize;
        let header: StoreHeader = serde_json::from_slice(r.take(header_len)?)
            .map_err(|e| SadError::CorruptWeights(format!("header: {e}")))?;
        if header.format_version != version {
            return Err(SadError::CorruptWeights("header version disagrees with preamble".into()));
        }
        let count = r.u32()? as usize;
        let mut tensors = BTreeMap::new();
        for _ in 0..count {
            let name_len = r.u32()? as usize;
            let name = String::from_utf8(r.take(name_len)?.to_vec())
                .map_err(|_| SadError::CorruptWeights("tensor name is not UTF-8".into()))?;
            let rank = r.u32()? as usize;
            let shape = (0..rank).map(|_| r.u64().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
            let n = shape.iter().try_fold(1usize, |a, &d| a.checked_mul(d));
            let n = n.filter(|&n| n <= (r.remaining() / 8)).ok_or_else(|| {
                SadError::CorruptWeights(format!("tensor {name} claims more data than the file holds"))
            })?;
            let raw = r.take(n * 8)?;
            let values = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
            if tensors.insert(name.clone(), Tensor { shape, values }).is_some() {
                return Err(SadError::CorruptWeights(format!("duplicate tensor {name}")));
            }
        }
        if r.remaining() != 0 {
            return Err(SadError::CorruptWeights(format!("{} trailing bytes", r.remaining())));
        }
        Ok(Self { header, tensors })
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.remaining() < n {
            return Err(SadError::CorruptWeights(format!("truncated at byte {}", self.pos)));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn save_weights(store: &WeightStore, path: impl AsRef<Path>) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(&store.to_bytes())?;
    Ok(())
}

/// Reads a weight file and validates its tensors against its own header.
pub fn load_weights(path: impl AsRef<Path>) -> Result<WeightStore> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    let store = WeightStore::from_bytes(&bytes)?;
    store.to_params()?;
    Ok(store)
}

/// Full-rate forward pass straight from a weight store.
pub fn srsad_forward(mel: &MelSpectrogram, weights: &WeightStore) -> Result<Vec<f64>> {
    if weights.header.architecture != Architecture::SrSad {
        return Err(SadError::IncompatibleWeights("weights are not for sr-sad".into()));
    }
    weights.to_params()?.predict(mel)
}

/// Low-complexity forward pass straight from a weight store.
pub fn srsad_lc_forward(mel: &MelSpectrogram, weights: &WeightStore) -> Result<Vec<f64>> {
    if weights.header.architecture != Architecture::SrSadLc {
        return Err(SadError::IncompatibleWeights("weights are not for sr-sad-lc".into()));
    }
    weights.to_params()?.predict(mel)
}
