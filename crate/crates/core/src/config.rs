//! Layered experiment configuration.
//!
//! Built-in defaults are overlaid by a TOML file and then by `a.b.c=value`
//! overrides. Every field is addressable by its dotted path, and unknown keys
//! are rejected.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::data::{
    generate_synthetic, DataOptions, DatasetKind, PreparedScenario, ScenarioKind, ScenarioSpec, SyntheticShiftModel,
};
use crate::error::{Error, Result};
use crate::trainer::RunConfig;

/// The task matrix of one suite run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteConfig {
    pub dataset: DatasetKind,
    pub kind: ScenarioKind,
    /// Target groups to run; empty runs every published task.
    pub targets: Vec<String>,
    pub baseline: bool,
    pub ablation: bool,
    /// Concurrent cells; 0 uses every available core.
    pub workers: usize,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            dataset: DatasetKind::Synthetic,
            kind: ScenarioKind::CrossDevice,
            targets: Vec::new(),
            baseline: true,
            ablation: false,
            workers: 0,
        }
    }
}

/// Parameters of a generated synthetic scenario.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub seed: u64,
    pub domains: usize,
    pub classes: usize,
    pub samples_per_class: usize,
    pub window_size: usize,
    /// Index of the target domain; the others are sources.
    pub target: usize,
    /// Replaces the randomly drawn class waveforms and shifts when set.
    pub model: Option<SyntheticShiftModel>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            domains: 3,
            classes: 4,
            samples_per_class: 50,
            window_size: 16,
            target: 2,
            model: None,
        }
    }
}

impl SynthConfig {
    pub fn model(&self) -> SyntheticShiftModel {
        self.model.clone().unwrap_or_else(|| {
            SyntheticShiftModel::random(self.domains, self.classes, self.samples_per_class, self.window_size, self.seed)
        })
    }

    pub fn validate(&self) -> Result<()> {
        let model = self.model();
        model.validate()?;
        if model.domains.len() < 2 {
            return Err(Error::config("synthetic.domains must be at least 2"));
        }
        if self.target >= model.domains.len() {
            return Err(Error::config(format!(
                "synthetic.target {} is out of range for {} domains",
                self.target,
                model.domains.len()
            )));
        }
        Ok(())
    }

    pub fn scenario_spec(&self) -> ScenarioSpec {
        let n = self.model().domains.len();
        let ids: Vec<String> = (0..n).map(|d| format!("d{d}")).collect();
        let sources: Vec<&str> = ids.iter().enumerate().filter(|(d, _)| *d != self.target).map(|(_, s)| s.as_str()).collect();
        ScenarioSpec::new(ScenarioKind::CrossDevice, DatasetKind::Synthetic, &sources, &ids[self.target])
    }

    /// Generates and standardizes the scenario.
    pub fn prepare(&self) -> Result<PreparedScenario> {
        self.validate()?;
        let mut domains = generate_synthetic(&self.model())?;
        for d in &mut domains {
            crate::data::standardize_domain(d)?;
        }
        PreparedScenario::new(self.scenario_spec(), domains)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    /// Root of the raw dataset cache; falls back to `$VACDA_DATA_DIR`.
    pub data_dir: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub run: RunConfig,
    pub data: DataOptions,
    pub suite: SuiteConfig,
    pub synthetic: SynthConfig,
    /// A single task; suites derive theirs from `suite` instead.
    pub scenario: Option<ScenarioSpec>,
    pub paths: PathsConfig,
}

pub const DATA_DIR_ENV: &str = "VACDA_DATA_DIR";

impl ExperimentConfig {
    /// Defaults, then the file (if any), then each `path=value` override.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut root = match Value::try_from(Self::default()).map_err(|e| Error::config(e.to_string()))? {
            Value::Table(t) => t,
            _ => unreachable!("config serializes to a table"),
        };
        if let Some(p) = path {
            let text = fs::read_to_string(p)
                .map_err(|e| Error::config(format!("cannot read config file {}: {e}", p.display())))?;
            let file: Table = text
                .parse()
                .map_err(|e| Error::config(format!("cannot parse config file {}: {e}", p.display())))?;
            merge(&mut root, file);
        }
        for o in overrides {
            apply_override(&mut root, o)?;
        }
        let cfg: Self = Value::Table(root)
            .try_into()
            .map_err(|e: toml::de::Error| Error::config(format!("invalid configuration: {}", e.message())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.run.validate()?;
        self.data.validate()?;
        if let Some(s) = &self.scenario {
            s.validate()?;
        }
        if self.suite.dataset == DatasetKind::Synthetic {
            self.synthetic.validate()?;
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes to toml")
    }

    pub fn data_dir(&self) -> Result<PathBuf> {
        self.paths
            .data_dir
            .clone()
            .or_else(|| std::env::var_os(DATA_DIR_ENV).map(PathBuf::from))
            .ok_or_else(|| Error::config(format!("no dataset directory: set paths.data_dir or ${DATA_DIR_ENV}")))
    }

    /// Builds one task's scenario: generated for the synthetic dataset,
    /// ingested from the dataset directory otherwise. Returns the seed
    /// recorded in the bundle.
    pub fn prepare_task(&self, spec: &ScenarioSpec) -> Result<(PreparedScenario, u64)> {
        if spec.dataset == DatasetKind::Synthetic {
            return Ok((self.synthetic.prepare()?, self.synthetic.seed));
        }
        let exec = self.run.exec();
        let domains = crate::data::ingest(&self.data_dir()?, spec, &self.data, exec)?;
        Ok((PreparedScenario::new(spec.clone(), domains)?, self.data.split_seed))
    }

    /// Tasks of the configured suite, or the single configured scenario.
    pub fn tasks(&self) -> Result<Vec<ScenarioSpec>> {
        if let Some(s) = &self.scenario {
            return Ok(vec![s.clone()]);
        }
        if self.suite.dataset == DatasetKind::Synthetic {
            return Ok(vec![self.synthetic.scenario_spec()]);
        }
        let all = ScenarioSpec::published_tasks(self.suite.kind, self.suite.dataset)?;
        if self.suite.targets.is_empty() {
            return Ok(all);
        }
        self.suite
            .targets
            .iter()
            .map(|t| {
                all.iter()
                    .find(|s| &s.target_group == t)
                    .cloned()
                    .ok_or_else(|| Error::config(format!("suite.targets: no published task targets `{t}`")))
            })
            .collect()
    }
}

fn merge(base: &mut Table, over: Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(Value::Table(b)), Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// Parses the right-hand side as a TOML value, falling back to a bare string.
fn parse_value(raw: &str) -> Value {
    format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()))
}

fn apply_override(root: &mut Table, expr: &str) -> Result<()> {
    let (path, raw) = expr
        .split_once('=')
        .ok_or_else(|| Error::config(format!("override `{expr}` is not of the form path=value")))?;
    let keys: Vec<&str> = path.trim().split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(Error::config(format!("override `{expr}` has an empty path segment")));
    }
    let mut table = root;
    for k in &keys[..keys.len() - 1] {
        let entry = table.entry(k.to_string()).or_insert_with(|| Value::Table(Table::new()));
        table = match entry {
            Value::Table(t) => t,
            _ => return Err(Error::config(format!("override `{expr}`: `{k}` is not a section"))),
        };
    }
    table.insert(keys[keys.len() - 1].to_string(), parse_value(raw.trim()));
    Ok(())
}
