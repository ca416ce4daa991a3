//! Run manifests: what a command was asked to do and exactly which inputs it
//! saw, written before any heavy work starts.
//!
//! Input hashes follow git's object framing (`blob <len>\0<bytes>`) with
//! SHA-256, and a directory hash is the SHA-256 of its sorted
//! `<relative path> <blob hash>` lines.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::data::bundle_files;
use crate::error::{Error, Result};
use crate::eval::config_hash;

pub const MANIFEST_FILE: &str = "manifest.json";

pub fn blob_hash(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    hex::encode(h.finalize())
}

pub fn file_hash(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(blob_hash(&bytes))
}

/// Content hash of a prepared-scenario bundle.
pub fn bundle_hash(dir: &Path) -> Result<String> {
    let mut h = Sha256::new();
    for f in bundle_files(dir)? {
        let rel = f.strip_prefix(dir).unwrap_or(&f);
        h.update(format!("{} {}\n", rel.display(), file_hash(&f)?).as_bytes());
    }
    Ok(hex::encode(h.finalize()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub code_version: String,
    /// Full effective configuration after all layers, as TOML.
    pub config: String,
    pub config_hash: String,
    pub seeds: Vec<u64>,
    /// Input name to content hash.
    pub inputs: BTreeMap<String, String>,
    /// Command-specific settings such as the seed of a single cell.
    #[serde(default)]
    pub params: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn new(command: &str, cfg: &ExperimentConfig) -> Self {
        Self {
            command: command.to_string(),
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            config: cfg.to_toml(),
            config_hash: config_hash(&cfg.run),
            seeds: cfg.run.seeds.clone(),
            inputs: BTreeMap::new(),
            params: BTreeMap::new(),
        }
    }

    pub fn param(mut self, key: &str, value: impl ToString) -> Self {
        self.params.insert(key.to_string(), value.to_string());
        self
    }

    /// Records a file or a bundle directory.
    pub fn input(&mut self, name: &str, path: &Path) -> Result<()> {
        let hash = if path.is_dir() { bundle_hash(path)? } else { file_hash(path)? };
        self.inputs.insert(name.to_string(), hash);
        Ok(())
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::format(&path, e.to_string()))
    }

    /// The configuration this manifest echoes.
    pub fn experiment_config(&self) -> Result<ExperimentConfig> {
        toml::from_str(&self.config).map_err(|e| Error::config(format!("manifest config: {e}")))
    }
}
