use serde::{Deserialize, Serialize};

use super::{DomainDataset, Role};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    CrossPosition,
    CrossPerson,
    CrossDevice,
}

impl ScenarioKind {
    pub fn grouping_key(self) -> GroupingKey {
        match self {
            ScenarioKind::CrossPosition => GroupingKey::Position,
            ScenarioKind::CrossPerson => GroupingKey::Subject,
            ScenarioKind::CrossDevice => GroupingKey::Device,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetKind {
    Dsads,
    Opportunity,
    Pamap2,
    Wisdm,
    Synthetic,
}

impl DatasetKind {
    pub fn display_name(self) -> &'static str {
        match self {
            DatasetKind::Dsads => "DSADS",
            DatasetKind::Opportunity => "OPPO.",
            DatasetKind::Pamap2 => "PAMAP2",
            DatasetKind::Wisdm => "WISDM",
            DatasetKind::Synthetic => "SYNTH",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GroupingKey {
    Position,
    Subject,
    Device,
}

/// Which domains form one adaptation task.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub kind: ScenarioKind,
    pub dataset: DatasetKind,
    pub grouping_key: GroupingKey,
    pub target_group: String,
    pub source_groups: Vec<String>,
    /// Class names to keep, in label order. Empty selects the dataset default.
    #[serde(default)]
    pub activity_filter: Vec<String>,
    /// Subjects to keep. Empty selects the dataset default.
    #[serde(default)]
    pub subject_filter: Vec<String>,
}

impl ScenarioSpec {
    pub fn new(
        kind: ScenarioKind,
        dataset: DatasetKind,
        sources: &[&str],
        target: &str,
    ) -> Self {
        Self {
            kind,
            dataset,
            grouping_key: kind.grouping_key(),
            target_group: target.to_string(),
            source_groups: sources.iter().map(|s| s.to_string()).collect(),
            activity_filter: Vec::new(),
            subject_filter: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.source_groups.is_empty() {
            return Err(Error::config("scenario.source_groups must not be empty"));
        }
        if self.source_groups.contains(&self.target_group) {
            return Err(Error::config(format!(
                "scenario.target_group `{}` is also listed as a source",
                self.target_group
            )));
        }
        let mut seen = std::collections::HashSet::new();
        if !self.source_groups.iter().all(|g| seen.insert(g)) {
            return Err(Error::config("scenario.source_groups contains duplicates"));
        }
        Ok(())
    }

    /// "A, B → T" as printed in result tables.
    pub fn task_label(&self) -> String {
        format!("{} → {}", self.source_groups.join(", "), self.target_group)
    }

    /// The leave-one-group-out task list of the published evaluation for a
    /// (scenario kind, dataset) block.
    pub fn published_tasks(kind: ScenarioKind, dataset: DatasetKind) -> Result<Vec<ScenarioSpec>> {
        use DatasetKind::*;
        use ScenarioKind::*;
        let leave_one_out = |groups: &[&str]| -> Vec<ScenarioSpec> {
            groups
                .iter()
                .map(|t| {
                    let sources: Vec<&str> = groups.iter().copied().filter(|g| g != t).collect();
                    ScenarioSpec::new(kind, dataset, &sources, t)
                })
                .collect()
        };
        let fixed = |sources: &[&str], targets: &[&str]| -> Vec<ScenarioSpec> {
            targets
                .iter()
                .map(|t| ScenarioSpec::new(kind, dataset, sources, t))
                .collect()
        };
        let tasks = match (kind, dataset) {
            (CrossPosition, Dsads) => leave_one_out(&["Torso", "RA", "LA", "RL", "LL"]),
            (CrossPosition, Opportunity) => leave_one_out(&["BACK", "RUA", "RLA", "LUA", "LLA"]),
            (CrossPosition, Pamap2) => leave_one_out(&["Wrist", "Chest", "Ankle"]),
            (CrossPerson, Dsads) => ["8", "7", "6"]
                .iter()
                .map(|t| {
                    let sources: Vec<String> =
                        (1..=8).map(|s| s.to_string()).filter(|s| s != t).collect();
                    let refs: Vec<&str> = sources.iter().map(String::as_str).collect();
                    ScenarioSpec::new(kind, dataset, &refs, t)
                })
                .collect(),
            (CrossPerson, Opportunity) => vec![
                ScenarioSpec::new(kind, dataset, &["1", "2", "3"], "4"),
                ScenarioSpec::new(kind, dataset, &["1", "2", "4"], "3"),
                ScenarioSpec::new(kind, dataset, &["1", "3", "4"], "2"),
            ],
            (CrossPerson, Wisdm) => fixed(&["1", "5", "7", "8", "12", "13", "15"], &["37", "38", "39"]),
            (CrossDevice, Wisdm) => vec![
                ScenarioSpec::new(kind, dataset, &["phone"], "watch"),
                ScenarioSpec::new(kind, dataset, &["watch"], "phone"),
            ],
            _ => {
                return Err(Error::config(format!(
                    "no published task list for {kind:?} on {dataset:?}"
                )))
            }
        };
        Ok(tasks)
    }
}

/// A scenario with its prepared domains: sources first, then the target.
#[derive(Clone, Debug)]
pub struct PreparedScenario {
    pub spec: ScenarioSpec,
    pub domains: Vec<DomainDataset>,
}

impl PreparedScenario {
    /// Marks `spec.target_group` as the target and checks the domain set.
    pub fn new(spec: ScenarioSpec, domains: Vec<DomainDataset>) -> Result<Self> {
        spec.validate()?;
        let mut ordered = Vec::with_capacity(domains.len());
        let mut target = None;
        for d in domains {
            if d.domain_id == spec.target_group {
                target = Some(d.into_target());
            } else if spec.source_groups.contains(&d.domain_id) {
                if d.role() == Role::Target {
                    return Err(Error::config(format!(
                        "source domain `{}` arrived without labels",
                        d.domain_id
                    )));
                }
                ordered.push(d);
            }
        }
        ordered.sort_by_key(|d| spec.source_groups.iter().position(|g| *g == d.domain_id));
        for g in &spec.source_groups {
            if !ordered.iter().any(|d| &d.domain_id == g) {
                return Err(Error::EmptyDomain(g.clone()));
            }
        }
        let target = target.ok_or_else(|| Error::EmptyDomain(spec.target_group.clone()))?;
        ordered.push(target);
        let class_set = &ordered[0].class_set;
        if ordered.iter().any(|d| &d.class_set != class_set) {
            return Err(Error::config("all domains of a scenario must share one class set"));
        }
        if let Some(d) = ordered.iter().find(|d| d.is_empty()) {
            return Err(Error::EmptyDomain(d.domain_id.clone()));
        }
        Ok(Self { spec, domains: ordered })
    }

    pub fn sources(&self) -> Vec<&DomainDataset> {
        self.domains.iter().filter(|d| d.role() == Role::Source).collect()
    }

    pub fn target(&self) -> &DomainDataset {
        self.domains
            .iter()
            .find(|d| d.role() == Role::Target)
            .expect("constructor guarantees a target")
    }

    pub fn class_set(&self) -> &[String] {
        &self.domains[0].class_set
    }

    pub fn window_shape(&self) -> Result<(usize, usize)> {
        self.domains
            .iter()
            .find_map(DomainDataset::window_shape)
            .ok_or_else(|| Error::EmptyDomain(self.spec.target_group.clone()))
    }
}
