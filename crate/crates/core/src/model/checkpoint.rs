use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::NetSpec;
use crate::error::{Error, Result};
use crate::nn::{ParamSet, TensorEntry};
use crate::rng::RngState;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"VCKP";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Named networks plus the state needed to resume or reproduce a run.
///
/// Layout: magic, `u32` version, `u32` header length, a JSON header with the
/// spec, epoch, rng state and tensor tables, then every tensor as
/// little-endian `f32` in header order.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub net: NetSpec,
    pub epoch: u32,
    pub rng: RngState,
    pub networks: Vec<(String, ParamSet)>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    net: NetSpec,
    epoch: u32,
    rng: RngState,
    networks: Vec<NetworkHeader>,
}

#[derive(Serialize, Deserialize)]
struct NetworkHeader {
    name: String,
    tensors: Vec<TensorEntry>,
}

impl Checkpoint {
    pub fn network(&self, name: &str) -> Option<&ParamSet> {
        self.networks.iter().find(|(n, _)| n == name).map(|(_, p)| p)
    }

    pub fn network_required(&self, name: &str, path: &Path) -> Result<&ParamSet> {
        self.network(name)
            .ok_or_else(|| Error::format(path, format!("checkpoint has no `{name}` network")))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let header = Header {
            net: self.net.clone(),
            epoch: self.epoch,
            rng: self.rng.clone(),
            networks: self
                .networks
                .iter()
                .map(|(name, p)| NetworkHeader { name: name.clone(), tensors: p.entries().to_vec() })
                .collect(),
        };
        let json = serde_json::to_vec(&header).expect("checkpoint header serializes");
        let mut out = Vec::with_capacity(12 + json.len());
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u32).to_le_bytes());
        out.extend_from_slice(&json);
        for (_, p) in &self.networks {
            for v in p.values() {
                out.extend_from_slice(&(*v as f32).to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let bad = |msg: &str| Error::format(path, msg);
        if bytes.len() < 12 || &bytes[..4] != CHECKPOINT_MAGIC {
            return Err(bad("not a checkpoint file"));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version != CHECKPOINT_VERSION {
            return Err(bad(&format!("unsupported checkpoint version {version}")));
        }
        let hlen = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let body = bytes.get(12..12 + hlen).ok_or_else(|| bad("truncated header"))?;
        let header: Header =
            serde_json::from_slice(body).map_err(|e| Error::format(path, format!("bad header: {e}")))?;
        let mut pos = 12 + hlen;
        let mut networks = Vec::with_capacity(header.networks.len());
        for nh in header.networks {
            let mut expected = 0;
            for t in &nh.tensors {
                if t.offset != expected {
                    return Err(bad("tensor table is not contiguous"));
                }
                expected += t.numel();
            }
            let raw = bytes
                .get(pos..pos + 4 * expected)
                .ok_or_else(|| bad("truncated tensor data"))?;
            pos += 4 * expected;
            let data = raw
                .chunks_exact(4)
                .map(|c| f64::from(f32::from_le_bytes(c.try_into().unwrap())))
                .collect();
            networks.push((nh.name, ParamSet::from_parts(nh.tensors, data)));
        }
        if pos != bytes.len() {
            return Err(bad("trailing bytes after tensor data"));
        }
        Ok(Self { net: header.net, epoch: header.epoch, rng: header.rng, networks })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes, path)
    }
}
