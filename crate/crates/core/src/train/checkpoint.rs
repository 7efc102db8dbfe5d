//! Checkpoint file: the 8 magic bytes `SDCCKPT1`, a little-endian `u32`
//! manifest length, a JSON manifest, then the tensors as little-endian
//! payloads in manifest order.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{Precision, TrainConfig};
use crate::error::{Error, Result};
use crate::grid::Scalar;
use crate::net::{NetworkSpec, NetworkState};

pub const MAGIC: &[u8; 8] = b"SDCCKPT1";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Parameters in their storage precision.
#[derive(Clone, Debug, PartialEq)]
pub enum ModelState {
    F32(NetworkState<f32>),
    F64(NetworkState<f64>),
}

impl ModelState {
    pub fn precision(&self) -> Precision {
        match self {
            ModelState::F32(_) => Precision::F32,
            ModelState::F64(_) => Precision::F64,
        }
    }

    pub fn to_f64(&self) -> NetworkState<f64> {
        match self {
            ModelState::F32(s) => s.cast(),
            ModelState::F64(s) => s.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub spec: NetworkSpec,
    pub config: TrainConfig,
    pub state: ModelState,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub dtype: String,
    /// Byte offset from the start of the payload section.
    pub offset: usize,
    /// Payload length in bytes.
    pub len: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointManifest {
    pub version: u32,
    pub spec: NetworkSpec,
    pub config: TrainConfig,
    pub tensors: Vec<TensorEntry>,
}

fn encode_tensors<T: Scalar>(state: &NetworkState<T>) -> (Vec<TensorEntry>, Vec<u8>) {
    let mut entries = Vec::new();
    let mut payload = Vec::new();
    for (name, t) in state.tensors() {
        let bytes = T::to_le_bytes_vec(t.data());
        entries.push(TensorEntry {
            name,
            shape: t.shape().to_vec(),
            dtype: T::DTYPE.to_string(),
            offset: payload.len(),
            len: bytes.len(),
        });
        payload.extend_from_slice(&bytes);
    }
    (entries, payload)
}

fn decode_tensors<T: Scalar>(spec: &NetworkSpec, entries: &[TensorEntry], payload: &[u8]) -> Result<NetworkState<T>> {
    let mut state = NetworkState::<T>::zeros(spec)?;
    let mut slots = state.tensors_mut();
    if slots.len() != entries.len() {
        return Err(Error::mismatch("checkpoint tensor count", &[slots.len()], &[entries.len()]));
    }
    let width = std::mem::size_of::<T>();
    for ((name, slot), e) in slots.iter_mut().zip(entries) {
        if *name != e.name {
            return Err(Error::MalformedHeader(format!("expected tensor {name}, found {}", e.name)));
        }
        if slot.shape() != e.shape.as_slice() {
            return Err(Error::mismatch(format!("tensor {name}"), slot.shape(), &e.shape));
        }
        if e.dtype != T::DTYPE {
            return Err(Error::MalformedHeader(format!(
                "tensor {name} has dtype {}, expected {}",
                e.dtype,
                T::DTYPE
            )));
        }
        if e.len != slot.len() * width {
            return Err(Error::MalformedHeader(format!("tensor {name} has {} bytes", e.len)));
        }
        let end = e.offset + e.len;
        if end > payload.len() {
            return Err(Error::TruncatedPayload {
                expected: end,
                found: payload.len(),
            });
        }
        for (v, chunk) in slot.data_mut().iter_mut().zip(payload[e.offset..end].chunks_exact(width)) {
            *v = T::from_le_chunk(chunk);
        }
    }
    drop(slots);
    Ok(state)
}

impl Checkpoint {
    pub fn encode(&self) -> Result<Vec<u8>> {
        let (tensors, payload) = match &self.state {
            ModelState::F32(s) => encode_tensors(s),
            ModelState::F64(s) => encode_tensors(s),
        };
        let manifest = CheckpointManifest {
            version: CHECKPOINT_VERSION,
            spec: self.spec.clone(),
            config: self.config.clone(),
            tensors,
        };
        let json = serde_json::to_vec(&manifest).map_err(|e| Error::json("checkpoint manifest", e))?;
        let len = u32::try_from(json.len()).map_err(|_| Error::InvalidArgument("manifest too large".into()))?;
        let mut out = Vec::with_capacity(12 + json.len() + payload.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&len.to_le_bytes());
        out.extend_from_slice(&json);
        out.extend_from_slice(&payload);
        Ok(out)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 12 {
            return Err(Error::TruncatedPayload {
                expected: 12,
                found: bytes.len(),
            });
        }
        if &bytes[..8] != MAGIC {
            if bytes.starts_with(b"SDCCKPT") {
                return Err(Error::UnsupportedVersion(String::from_utf8_lossy(&bytes[..8]).into_owned()));
            }
            return Err(Error::MalformedHeader("not a checkpoint (bad magic)".into()));
        }
        let len = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
        if bytes.len() < 12 + len {
            return Err(Error::TruncatedPayload {
                expected: 12 + len,
                found: bytes.len(),
            });
        }
        let manifest: CheckpointManifest =
            serde_json::from_slice(&bytes[12..12 + len]).map_err(|e| Error::json("checkpoint manifest", e))?;
        if manifest.version != CHECKPOINT_VERSION {
            return Err(Error::UnsupportedVersion(format!("checkpoint version {}", manifest.version)));
        }
        let payload = &bytes[12 + len..];
        let expected = manifest.tensors.iter().map(|t| t.offset + t.len).max().unwrap_or(0);
        if payload.len() < expected {
            return Err(Error::TruncatedPayload {
                expected: 12 + len + expected,
                found: bytes.len(),
            });
        }
        let dtype = manifest.tensors.first().map(|t| t.dtype.as_str()).unwrap_or(f64::DTYPE);
        let state = if dtype == f32::DTYPE {
            ModelState::F32(decode_tensors(&manifest.spec, &manifest.tensors, payload)?)
        } else {
            ModelState::F64(decode_tensors(&manifest.spec, &manifest.tensors, payload)?)
        };
        Ok(Self {
            spec: manifest.spec,
            config: manifest.config,
            state,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.encode()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::decode(&std::fs::read(path).map_err(|e| Error::io(path, e))?)
    }

    /// Loads and checks every tensor against `spec`.
    pub fn load_for(path: impl AsRef<Path>, spec: &NetworkSpec) -> Result<Self> {
        let ck = Self::load(path)?;
        ck.check_spec(spec)?;
        Ok(ck)
    }

    pub fn check_spec(&self, spec: &NetworkSpec) -> Result<()> {
        let want = NetworkState::<f64>::zeros(spec)?;
        let have = self.state.to_f64();
        let (want, have) = (want.tensors(), have.tensors());
        for (w, h) in want.iter().zip(&have) {
            if w.0 != h.0 {
                return Err(Error::mismatch(format!("tensor {}", w.0), w.1.shape(), &[]));
            }
            if w.1.shape() != h.1.shape() {
                return Err(Error::mismatch(format!("tensor {}", w.0), w.1.shape(), h.1.shape()));
            }
        }
        if want.len() != have.len() {
            let name = if want.len() > have.len() { &want[have.len()].0 } else { &have[want.len()].0 };
            return Err(Error::mismatch(format!("tensor {name}"), &[want.len()], &[have.len()]));
        }
        Ok(())
    }
}
