//! One parser per public dataset layout. Everything format specific (column
//! indices, delimiters, directory naming, label codes) stays in here; the rest
//! of the pipeline only sees [`Recording`]s.

mod dsads;
mod opportunity;
mod pamap2;
mod wisdm;

use std::path::{Path, PathBuf};

use super::{DatasetKind, Recording};
use crate::error::{Error, Result};

pub use dsads::Dsads;
pub use opportunity::Opportunity;
pub use pamap2::Pamap2;
pub use wisdm::Wisdm;

pub trait DatasetAdapter: Sync {
    /// Every class name the raw labels can map to, indexed by the label ids
    /// used in [`Recording::labels`].
    fn known_classes(&self) -> &'static [&'static str];

    /// Activity selection used when a scenario leaves its filter empty.
    fn default_activities(&self) -> Vec<&'static str>;

    /// Subject selection used when a scenario leaves its filter empty.
    fn default_subjects(&self) -> Vec<String>;

    /// Independent read units (files or directories) under `root`.
    fn list_units(&self, root: &Path) -> Result<Vec<PathBuf>>;

    /// Parses one unit into accelerometer recordings.
    fn read_unit(&self, unit: &Path) -> Result<Vec<Recording>>;
}

pub fn adapter_for(kind: DatasetKind) -> Result<&'static dyn DatasetAdapter> {
    match kind {
        DatasetKind::Dsads => Ok(&Dsads),
        DatasetKind::Opportunity => Ok(&Opportunity),
        DatasetKind::Pamap2 => Ok(&Pamap2),
        DatasetKind::Wisdm => Ok(&Wisdm),
        DatasetKind::Synthetic => Err(Error::config(
            "synthetic scenarios are generated, not ingested; use the synth command",
        )),
    }
}

pub(crate) fn ingest_err(path: &Path, msg: impl Into<String>) -> Error {
    Error::Ingest {
        path: path.to_path_buf(),
        msg: msg.into(),
    }
}

pub(crate) fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| ingest_err(path, e.to_string()))
}

pub(crate) fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    let rd = std::fs::read_dir(dir).map_err(|e| ingest_err(dir, e.to_string()))?;
    let mut out = Vec::new();
    for entry in rd {
        out.push(entry.map_err(|e| ingest_err(dir, e.to_string()))?.path());
    }
    out.sort();
    Ok(out)
}

/// Parses a float field; "NaN" (any case) and empty fields become NaN.
pub(crate) fn parse_f64(field: &str, path: &Path, line: usize) -> Result<f64> {
    let f = field.trim();
    if f.is_empty() || f.eq_ignore_ascii_case("nan") {
        return Ok(f64::NAN);
    }
    f.parse()
        .map_err(|_| ingest_err(path, format!("line {line}: cannot parse `{f}` as a number")))
}

fn file_stem(path: &Path) -> &str {
    path.file_stem().and_then(|s| s.to_str()).unwrap_or_default()
}
