//! Prepared-scenario bundle: one directory per domain holding a binary tensor
//! file, a label file and (for the target) a withheld-label file per split,
//! plus TOML manifests.
//!
//! Tensor file layout, little-endian: magic `VCDA`, format version `u32`,
//! channels `u32`, window `u32`, count `u32`, then `count × channels × window`
//! `f32` values in row-major order. Label files are bare `u16` per window with
//! `0xFFFF` meaning unlabeled.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{ChannelStats, DomainDataset, PreparedScenario, Role, ScenarioSpec, SensorWindow, Split, UNLABELED};
use crate::error::{Error, Result};

pub const TENSOR_MAGIC: &[u8; 4] = b"VCDA";
pub const TENSOR_VERSION: u32 = 1;
const HEADER_LEN: usize = 20;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BundleManifest {
    pub format_version: u32,
    pub seed: u64,
    pub scenario: ScenarioSpec,
    pub class_set: Vec<String>,
    pub domains: Vec<DomainEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainEntry {
    pub domain_id: String,
    pub dir: String,
    pub role: Role,
}

/// Per-domain manifest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct DomainManifest {
    domain_id: String,
    role: Role,
    seed: u64,
    class_set: Vec<String>,
    counts: Vec<usize>,
    standardization: Option<ChannelStats>,
    scenario: ScenarioSpec,
}

fn dir_name(domain_id: &str, index: usize) -> String {
    let clean: String = domain_id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect();
    format!("{index:02}_{clean}")
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn encode_tensor(windows: &[SensorWindow], channels: usize, len: usize) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + windows.len() * channels * len * 4);
    out.extend_from_slice(TENSOR_MAGIC);
    for v in [TENSOR_VERSION, channels as u32, len as u32, windows.len() as u32] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for w in windows {
        for v in &w.values {
            out.extend_from_slice(&(*v as f32).to_le_bytes());
        }
    }
    out
}

fn u32_at(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4 bytes"))
}

/// Decodes a tensor file into `(channels, window, values per window)`.
pub(crate) fn decode_tensor(path: &Path, bytes: &[u8]) -> Result<(usize, usize, Vec<Vec<f64>>)> {
    if bytes.len() < HEADER_LEN || &bytes[..4] != TENSOR_MAGIC {
        return Err(Error::format(path, "missing VCDA header"));
    }
    let version = u32_at(bytes, 4);
    if version != TENSOR_VERSION {
        return Err(Error::format(path, format!("unsupported tensor version {version}")));
    }
    let (channels, len, count) = (
        u32_at(bytes, 8) as usize,
        u32_at(bytes, 12) as usize,
        u32_at(bytes, 16) as usize,
    );
    let per = channels * len;
    if bytes.len() != HEADER_LEN + count * per * 4 {
        return Err(Error::format(path, "body length does not match the header"));
    }
    let values = bytes[HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f64::from(f32::from_le_bytes(c.try_into().expect("4 bytes"))))
        .collect::<Vec<_>>();
    Ok((channels, len, values.chunks(per.max(1)).map(<[f64]>::to_vec).take(count).collect()))
}

fn encode_labels(labels: impl Iterator<Item = u16>) -> Vec<u8> {
    labels.flat_map(u16::to_le_bytes).collect()
}

fn decode_labels(path: &Path, bytes: &[u8], count: usize) -> Result<Vec<u16>> {
    if bytes.len() != 2 * count {
        return Err(Error::format(path, format!("expected {count} labels")));
    }
    Ok(bytes
        .chunks_exact(2)
        .map(|c| u16::from_le_bytes([c[0], c[1]]))
        .collect())
}

/// Writes `scenario` under `dir`, creating it if needed.
pub fn write_bundle(dir: &Path, scenario: &PreparedScenario, seed: u64) -> Result<BundleManifest> {
    let (channels, len) = scenario.window_shape()?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut entries = Vec::new();
    for (i, d) in scenario.domains.iter().enumerate() {
        let name = dir_name(&d.domain_id, i);
        let ddir = dir.join(&name);
        fs::create_dir_all(&ddir).map_err(|e| Error::io(&ddir, e))?;
        for s in Split::ALL {
            let ws = d.split(s);
            write_file(&ddir.join(format!("{}.bin", s.name())), &encode_tensor(ws, channels, len))?;
            write_file(
                &ddir.join(format!("{}.labels", s.name())),
                &encode_labels(ws.iter().map(|w| w.label().unwrap_or(UNLABELED))),
            )?;
            if let Some(withheld) = d.withheld_for_bundle(s) {
                write_file(
                    &ddir.join(format!("{}.eval_labels", s.name())),
                    &encode_labels(withheld.iter().copied()),
                )?;
            }
        }
        let manifest = DomainManifest {
            domain_id: d.domain_id.clone(),
            role: d.role(),
            seed,
            class_set: d.class_set.clone(),
            counts: Split::ALL.iter().map(|&s| d.split(s).len()).collect(),
            standardization: d.stats.clone(),
            scenario: scenario.spec.clone(),
        };
        let text = toml::to_string(&manifest).map_err(|e| Error::format(&ddir, e.to_string()))?;
        write_file(&ddir.join("manifest.toml"), text.as_bytes())?;
        entries.push(DomainEntry {
            domain_id: d.domain_id.clone(),
            dir: name,
            role: d.role(),
        });
    }
    let manifest = BundleManifest {
        format_version: TENSOR_VERSION,
        seed,
        scenario: scenario.spec.clone(),
        class_set: scenario.class_set().to_vec(),
        domains: entries,
    };
    let text = toml::to_string(&manifest).map_err(|e| Error::format(dir, e.to_string()))?;
    write_file(&dir.join("scenario.toml"), text.as_bytes())?;
    Ok(manifest)
}

pub(crate) fn read_manifest(dir: &Path) -> Result<BundleManifest> {
    let path = dir.join("scenario.toml");
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    toml::from_str(&text).map_err(|e| Error::format(&path, e.to_string()))
}

/// Files making up a bundle, in a stable order (for content hashing).
pub fn bundle_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let manifest = read_manifest(dir)?;
    let mut files = vec![dir.join("scenario.toml")];
    for e in &manifest.domains {
        let ddir = dir.join(&e.dir);
        files.push(ddir.join("manifest.toml"));
        for s in Split::ALL {
            files.push(ddir.join(format!("{}.bin", s.name())));
            files.push(ddir.join(format!("{}.labels", s.name())));
            if e.role == Role::Target {
                files.push(ddir.join(format!("{}.eval_labels", s.name())));
            }
        }
    }
    Ok(files)
}

pub fn read_bundle(dir: &Path) -> Result<PreparedScenario> {
    let manifest = read_manifest(dir)?;
    let mut domains = Vec::new();
    for e in &manifest.domains {
        let ddir = dir.join(&e.dir);
        let mpath = ddir.join("manifest.toml");
        let dm: DomainManifest = toml::from_str(
            &fs::read_to_string(&mpath).map_err(|err| Error::io(&mpath, err))?,
        )
        .map_err(|err| Error::format(&mpath, err.to_string()))?;
        let mut splits: [Vec<SensorWindow>; 3] = Default::default();
        let mut withheld: [Vec<u16>; 3] = Default::default();
        for s in Split::ALL {
            let tpath = ddir.join(format!("{}.bin", s.name()));
            let (channels, _, values) = decode_tensor(&tpath, &read_file(&tpath)?)?;
            let lpath = ddir.join(format!("{}.labels", s.name()));
            let labels = decode_labels(&lpath, &read_file(&lpath)?, values.len())?;
            if e.role == Role::Target {
                let epath = ddir.join(format!("{}.eval_labels", s.name()));
                withheld[s as usize] = decode_labels(&epath, &read_file(&epath)?, values.len())?;
            }
            splits[s as usize] = values
                .into_iter()
                .zip(labels)
                .map(|(v, l)| {
                    let label = (l != UNLABELED).then_some(l);
                    SensorWindow::new(v, channels, label, &e.domain_id)
                })
                .collect::<Result<_>>()?;
        }
        let mut d = match e.role {
            Role::Source => {
                let [train, val, test] = splits;
                DomainDataset::labeled(&e.domain_id, dm.class_set.clone(), train, val, test)?
            }
            Role::Target => DomainDataset::target_from_parts(
                e.domain_id.clone(),
                dm.class_set.clone(),
                splits,
                withheld,
            ),
        };
        d.stats = dm.standardization;
        domains.push(d);
    }
    PreparedScenario::new(manifest.scenario, domains)
}
