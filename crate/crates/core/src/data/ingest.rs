use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::adapters::{adapter_for, ingest_err};
use super::{
    split, standardize_domain, window_offsets, DomainDataset, GroupingKey, ScenarioSpec,
    SensorWindow, SplitRatios, CHANNELS,
};
use crate::error::{Error, Result};
use crate::par::Exec;

/// One continuous accelerometer stream as parsed from disk. Row labels index
/// the adapter's `known_classes`; `None` marks null or unknown activity.
#[derive(Clone, Debug, PartialEq)]
pub struct Recording {
    pub origin: PathBuf,
    pub subject: String,
    pub position: String,
    pub device: String,
    pub rows: Vec<[f64; 3]>,
    pub labels: Vec<Option<u16>>,
}

impl Recording {
    pub fn new(
        origin: &Path,
        subject: impl Into<String>,
        position: impl Into<String>,
        device: impl Into<String>,
    ) -> Self {
        Self {
            origin: origin.to_path_buf(),
            subject: subject.into(),
            position: position.into(),
            device: device.into(),
            rows: Vec::new(),
            labels: Vec::new(),
        }
    }

    pub fn push(&mut self, row: [f64; 3], label: Option<u16>) {
        self.rows.push(row);
        self.labels.push(label);
    }

    pub fn group(&self, key: GroupingKey) -> &str {
        match key {
            GroupingKey::Position => &self.position,
            GroupingKey::Subject => &self.subject,
            GroupingKey::Device => &self.device,
        }
    }
}

/// Windowing and split parameters shared by every ingested domain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataOptions {
    pub window_size: usize,
    pub overlap: f64,
    pub split: SplitRatios,
    pub split_seed: u64,
}

impl Default for DataOptions {
    fn default() -> Self {
        Self {
            window_size: 100,
            overlap: 0.1,
            split: SplitRatios::default(),
            split_seed: 0,
        }
    }
}

impl DataOptions {
    pub fn validate(&self) -> Result<()> {
        if self.window_size < 2 {
            return Err(Error::config("data.window_size must be at least 2"));
        }
        if !(0.0..1.0).contains(&self.overlap) {
            return Err(Error::config("data.overlap must lie in [0, 1)"));
        }
        self.split.validate()
    }
}

/// Windows one recording.
///
/// Rows with a non-finite value, a null label or a label outside `class_map`
/// are dropped first and the remaining rows are windowed as one stream. Each
/// window takes the majority label of its rows (ties go to the lower class
/// index) and is dropped when that label covers less than half the window.
/// `class_map[raw_label]` gives the class index, or `None` to drop the row.
pub fn window_recording(
    rec: &Recording,
    class_map: &[Option<u16>],
    n_classes: usize,
    window_size: usize,
    overlap: f64,
    domain_id: &str,
) -> Vec<SensorWindow> {
    let kept: Vec<(usize, u16)> = rec
        .rows
        .iter()
        .zip(&rec.labels)
        .enumerate()
        .filter_map(|(i, (row, label))| {
            let class = class_map.get((*label)? as usize).copied().flatten()?;
            row.iter().all(|v| v.is_finite()).then_some((i, class))
        })
        .collect();
    let t = kept.len();
    let mut out = Vec::new();
    for start in window_offsets(t, window_size, overlap) {
        let span = &kept[start..start + window_size];
        let mut counts = vec![0usize; n_classes];
        for (_, c) in span {
            counts[*c as usize] += 1;
        }
        let (best, &count) = counts
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
            .expect("n_classes > 0");
        if 2 * count < window_size {
            continue;
        }
        let mut values = Vec::with_capacity(CHANNELS * window_size);
        for ch in 0..CHANNELS {
            values.extend(span.iter().map(|(i, _)| rec.rows[*i][ch]));
        }
        let w = SensorWindow::new(values, CHANNELS, Some(best as u16), domain_id)
            .expect("finite rows only")
            .with_meta("subject", rec.subject.clone())
            .with_meta("position", rec.position.clone())
            .with_meta("device", rec.device.clone());
        out.push(w);
    }
    out
}

/// Reads a dataset root and returns one standardized domain per scenario
/// group: the sources in `spec.source_groups` order, then the target (still
/// labeled; [`PreparedScenario::new`] withholds its labels).
///
/// [`PreparedScenario::new`]: super::PreparedScenario::new
pub fn ingest(
    root: &Path,
    spec: &ScenarioSpec,
    opts: &DataOptions,
    exec: Exec,
) -> Result<Vec<DomainDataset>> {
    spec.validate()?;
    opts.validate()?;
    let adapter = adapter_for(spec.dataset)?;
    let known = adapter.known_classes();

    let class_set: Vec<String> = if spec.activity_filter.is_empty() {
        adapter.default_activities().iter().map(|s| s.to_string()).collect()
    } else {
        spec.activity_filter.clone()
    };
    let mut class_map = vec![None; known.len()];
    for (idx, name) in class_set.iter().enumerate() {
        let raw = known.iter().position(|k| k == name).ok_or_else(|| {
            Error::config(format!(
                "scenario.activity_filter names unknown class `{name}` for {:?}",
                spec.dataset
            ))
        })?;
        class_map[raw] = Some(idx as u16);
    }
    let subjects: Vec<String> = if spec.subject_filter.is_empty() {
        adapter.default_subjects()
    } else {
        spec.subject_filter.clone()
    };

    if !root.is_dir() {
        return Err(ingest_err(root, "dataset root does not exist or is not a directory"));
    }
    let units = adapter.list_units(root)?;
    if units.is_empty() {
        return Err(ingest_err(root, "no dataset files found in the expected layout"));
    }
    let parsed = exec.map(&units, |_, u| adapter.read_unit(u));

    let groups: Vec<&String> = spec.source_groups.iter().chain([&spec.target_group]).collect();
    let mut windows: BTreeMap<&str, Vec<SensorWindow>> =
        groups.iter().map(|g| (g.as_str(), Vec::new())).collect();
    for recs in parsed {
        for rec in recs? {
            // cross-person tasks select by group, every other kind by subject
            if spec.grouping_key != GroupingKey::Subject && !subjects.contains(&rec.subject) {
                continue;
            }
            let group = rec.group(spec.grouping_key);
            if let Some(bucket) = windows.get_mut(group) {
                bucket.extend(window_recording(
                    &rec,
                    &class_map,
                    class_set.len(),
                    opts.window_size,
                    opts.overlap,
                    group,
                ));
            }
        }
    }

    groups
        .iter()
        .map(|g| {
            let ws = windows.remove(g.as_str()).unwrap_or_default();
            if ws.is_empty() {
                return Err(Error::EmptyDomain(g.to_string()));
            }
            let [train, val, test] = split(ws, opts.split, opts.split_seed, &class_set)?;
            let mut d = DomainDataset::labeled(g.as_str(), class_set.clone(), train, val, test)?;
            standardize_domain(&mut d)?;
            Ok(d)
        })
        .collect()
}
