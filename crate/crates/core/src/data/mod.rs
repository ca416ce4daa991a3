//! Sensor windows, per-domain datasets and everything that produces them.

pub mod adapters;
mod bundle;
mod ingest;
mod scenario;
mod split;
mod standardize;
mod synthetic;
mod window;

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use bundle::{read_bundle, write_bundle, BundleManifest, TENSOR_MAGIC, TENSOR_VERSION};
pub use ingest::{ingest, window_recording, DataOptions, Recording};
pub use scenario::{DatasetKind, GroupingKey, PreparedScenario, ScenarioKind, ScenarioSpec};
pub use split::{split, SplitRatios};
pub use standardize::{standardize_domain, ChannelStats};
pub use synthetic::{generate_synthetic, ClassWaveform, DomainShift, SyntheticShiftModel};
pub use window::{stride_for, window, window_offsets};

/// Accelerometer axes per window.
pub const CHANNELS: usize = 3;

/// Label value used on disk for "no label".
pub const UNLABELED: u16 = u16::MAX;

/// One fixed-length multichannel segment, stored channel-major
/// (`values[ch * len + t]`).
#[derive(Clone, Debug, PartialEq)]
pub struct SensorWindow {
    pub values: Vec<f64>,
    pub channels: usize,
    pub len: usize,
    label: Option<u16>,
    pub domain_id: String,
    pub meta: BTreeMap<String, String>,
}

impl SensorWindow {
    pub fn new(
        values: Vec<f64>,
        channels: usize,
        label: Option<u16>,
        domain_id: impl Into<String>,
    ) -> Result<Self> {
        if channels == 0 || values.len() % channels != 0 {
            return Err(Error::shape(format!(
                "{} values do not divide into {channels} channels",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::non_finite("window values", "window construction"));
        }
        Ok(Self {
            len: values.len() / channels,
            values,
            channels,
            label,
            domain_id: domain_id.into(),
            meta: BTreeMap::new(),
        })
    }

    pub fn with_meta(mut self, key: &str, value: impl Into<String>) -> Self {
        self.meta.insert(key.to_string(), value.into());
        self
    }

    /// The activity label. Always `None` for windows of a target domain.
    pub fn label(&self) -> Option<u16> {
        self.label
    }

    pub fn channel(&self, ch: usize) -> &[f64] {
        &self.values[ch * self.len..(ch + 1) * self.len]
    }

    pub fn at(&self, ch: usize, t: usize) -> f64 {
        self.values[ch * self.len + t]
    }

    fn take_label(&mut self) -> Option<u16> {
        self.label.take()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Role {
    Source,
    Target,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

/// Labels of a target domain, kept away from the windows the trainer sees.
/// Every read is counted so tests can prove training never touched them.
#[derive(Debug, Default)]
struct WithheldLabels {
    labels: [Vec<u16>; 3],
    reads: AtomicUsize,
}

impl Clone for WithheldLabels {
    fn clone(&self) -> Self {
        Self {
            labels: self.labels.clone(),
            reads: AtomicUsize::new(self.reads.load(Ordering::Relaxed)),
        }
    }
}

/// All windows of one domain, split into train/val/test.
#[derive(Clone, Debug)]
pub struct DomainDataset {
    pub domain_id: String,
    role: Role,
    splits: [Vec<SensorWindow>; 3],
    pub class_set: Vec<String>,
    pub stats: Option<ChannelStats>,
    withheld: Option<WithheldLabels>,
}

impl DomainDataset {
    /// A fully labeled domain. Every window must carry a label in range.
    pub fn labeled(
        domain_id: impl Into<String>,
        class_set: Vec<String>,
        train: Vec<SensorWindow>,
        val: Vec<SensorWindow>,
        test: Vec<SensorWindow>,
    ) -> Result<Self> {
        let domain_id = domain_id.into();
        for w in train.iter().chain(&val).chain(&test) {
            match w.label {
                Some(l) if (l as usize) < class_set.len() => {}
                other => {
                    return Err(Error::shape(format!(
                        "window in domain `{domain_id}` has label {other:?} outside class set of size {}",
                        class_set.len()
                    )))
                }
            }
        }
        Ok(Self {
            domain_id,
            role: Role::Source,
            splits: [train, val, test],
            class_set,
            stats: None,
            withheld: None,
        })
    }

    /// Turns this domain into the unlabeled target: labels move out of the
    /// windows into a counted store only reachable through [`eval_labels`].
    ///
    /// [`eval_labels`]: DomainDataset::eval_labels
    pub fn into_target(mut self) -> Self {
        if self.role == Role::Target {
            return self;
        }
        let mut withheld = WithheldLabels::default();
        for s in Split::ALL {
            withheld.labels[s.index()] = self.splits[s.index()]
                .iter_mut()
                .map(|w| w.take_label().unwrap_or(UNLABELED))
                .collect();
        }
        self.role = Role::Target;
        self.withheld = Some(withheld);
        self
    }

    pub fn role(&self) -> Role {
        self.role
    }

    /// Trainer-visible windows. For a target domain these carry no labels.
    pub fn split(&self, split: Split) -> &[SensorWindow] {
        &self.splits[split.index()]
    }

    pub(crate) fn split_mut(&mut self, split: Split) -> &mut Vec<SensorWindow> {
        &mut self.splits[split.index()]
    }

    pub fn len(&self) -> usize {
        self.splits.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn window_shape(&self) -> Option<(usize, usize)> {
        self.splits
            .iter()
            .flatten()
            .next()
            .map(|w| (w.channels, w.len))
    }

    /// Ground-truth labels for evaluation. Reading a target domain's labels
    /// increments its withheld-label counter.
    pub fn eval_labels(&self, split: Split) -> Result<Vec<u16>> {
        match &self.withheld {
            Some(w) => {
                w.reads.fetch_add(1, Ordering::Relaxed);
                let labels = w.labels[split.index()].clone();
                if labels.contains(&UNLABELED) {
                    return Err(Error::DegenerateBatch(format!(
                        "target domain `{}` has no ground truth for its {} split",
                        self.domain_id,
                        split.name()
                    )));
                }
                Ok(labels)
            }
            None => self.splits[split.index()]
                .iter()
                .map(|w| {
                    w.label.ok_or_else(|| {
                        Error::DegenerateBatch(format!(
                            "unlabeled window in source domain `{}`",
                            self.domain_id
                        ))
                    })
                })
                .collect(),
        }
    }

    /// How many times withheld target labels have been read.
    pub fn withheld_label_reads(&self) -> usize {
        self.withheld
            .as_ref()
            .map_or(0, |w| w.reads.load(Ordering::Relaxed))
    }

    /// Raw withheld labels for serialization; does not count as a read.
    pub(crate) fn withheld_for_bundle(&self, split: Split) -> Option<&[u16]> {
        self.withheld.as_ref().map(|w| w.labels[split.index()].as_slice())
    }

    pub(crate) fn target_from_parts(
        domain_id: String,
        class_set: Vec<String>,
        splits: [Vec<SensorWindow>; 3],
        withheld: [Vec<u16>; 3],
    ) -> Self {
        Self {
            domain_id,
            role: Role::Target,
            splits,
            class_set,
            stats: None,
            withheld: Some(WithheldLabels {
                labels: withheld,
                reads: AtomicUsize::new(0),
            }),
        }
    }
}


pub use bundle::bundle_files;
