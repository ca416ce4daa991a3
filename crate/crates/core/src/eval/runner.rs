use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{mean_std, micro_f1};
use crate::data::{PreparedScenario, ScenarioSpec, Split};
use crate::error::{Error, Result};
use crate::trainer::{check_class_coverage, predict, pretrain, source_only, train_classifier, ClassifierOutcome, PretrainOutcome, RunConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Vacda,
    VacdaNoContrastive,
    SourceOnly,
}

impl Method {
    pub fn display_name(self) -> &'static str {
        match self {
            Method::Vacda => "VaCDA",
            Method::VacdaNoContrastive => "VaCDA w/o contrastive",
            Method::SourceOnly => "Source-only",
        }
    }

    pub fn for_config(cfg: &RunConfig) -> Self {
        if cfg.contrastive {
            Method::Vacda
        } else {
            Method::VacdaNoContrastive
        }
    }
}

/// Target test-split scores of one method on one task across seeds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub task: String,
    pub dataset: String,
    pub scenario_kind: String,
    pub method: Method,
    pub class_set: Vec<String>,
    pub seeds: Vec<u64>,
    /// Micro-F1 on the target test split, one per seed.
    pub per_seed: Vec<f64>,
    /// Micro-F1 on the target train split (seen unlabeled during
    /// pretraining), reported separately.
    pub transductive: Vec<f64>,
    pub mean: f64,
    pub std: f64,
    pub config_hash: String,
    pub wall_clock_secs: f64,
    /// Set when the task failed; scores are then empty.
    pub error: Option<String>,
}

impl MetricsReport {
    pub fn from_scores(
        scenario: &PreparedScenario,
        method: Method,
        cfg: &RunConfig,
        seeds: Vec<u64>,
        per_seed: Vec<f64>,
        transductive: Vec<f64>,
        wall_clock_secs: f64,
    ) -> Self {
        Self::for_spec(&scenario.spec, scenario.class_set(), method, cfg, seeds, per_seed, transductive, wall_clock_secs)
    }

    /// Like [`MetricsReport::from_scores`] when only the task description is
    /// at hand, e.g. when the scenario itself could not be prepared.
    #[allow(clippy::too_many_arguments)]
    pub fn for_spec(
        spec: &ScenarioSpec,
        class_set: &[String],
        method: Method,
        cfg: &RunConfig,
        seeds: Vec<u64>,
        per_seed: Vec<f64>,
        transductive: Vec<f64>,
        wall_clock_secs: f64,
    ) -> Self {
        let (mean, std) = if per_seed.is_empty() { (0.0, 0.0) } else { mean_std(&per_seed) };
        Self {
            task: spec.task_label(),
            dataset: spec.dataset.display_name().to_string(),
            scenario_kind: format!("{:?}", spec.kind),
            method,
            class_set: class_set.to_vec(),
            seeds,
            per_seed,
            transductive,
            mean,
            std,
            config_hash: config_hash(cfg),
            wall_clock_secs,
            error: None,
        }
    }

    pub fn failed(scenario: &PreparedScenario, method: Method, cfg: &RunConfig, err: &Error) -> Self {
        Self::from_scores(scenario, method, cfg, cfg.seeds.clone(), vec![], vec![], 0.0).with_error(err.to_string())
    }

    /// Marks the report failed; scores are dropped.
    pub fn with_error(mut self, msg: impl Into<String>) -> Self {
        self.per_seed.clear();
        self.transductive.clear();
        self.mean = 0.0;
        self.std = 0.0;
        self.error = Some(msg.into());
        self
    }

    /// Equality of everything except wall-clock time.
    pub fn same_results(&self, other: &Self) -> bool {
        Self { wall_clock_secs: 0.0, ..self.clone() } == Self { wall_clock_secs: 0.0, ..other.clone() }
    }
}

/// SHA-256 of the canonical JSON form of a run configuration.
pub fn config_hash(cfg: &RunConfig) -> String {
    let json = serde_json::to_vec(cfg).expect("run config serializes");
    hex::encode(Sha256::digest(&json))
}

/// Artifacts and scores of one seed of the full pipeline.
#[derive(Clone, Debug)]
pub struct SeedResult {
    pub pretrain: PretrainOutcome,
    pub classifier: ClassifierOutcome,
    /// Target label reads observed after both training stages, before scoring.
    pub label_reads_during_training: usize,
    pub test_f1: f64,
    pub transductive_f1: f64,
}

fn target_scores(
    scenario: &PreparedScenario,
    encoder: &crate::model::Encoder,
    classifier: &crate::model::Classifier,
    cfg: &RunConfig,
) -> Result<(f64, f64)> {
    let target = scenario.target();
    let n = scenario.class_set().len();
    let mut out = [0.0; 2];
    for (slot, split) in [(0, Split::Test), (1, Split::Train)] {
        let pred = predict(encoder, classifier, target.split(split), cfg.exec())?;
        out[slot] = micro_f1(&target.eval_labels(split)?, &pred, n)?;
    }
    Ok((out[0], out[1]))
}

/// Pretrain, train the classifier and score the target for one seed.
pub fn run_seed(scenario: &PreparedScenario, cfg: &RunConfig, seed: u64) -> Result<SeedResult> {
    let reads_before = scenario.target().withheld_label_reads();
    check_class_coverage(scenario)?;
    let pre = pretrain(scenario, cfg, seed)?;
    let clf = train_classifier(&pre.encoder, scenario, cfg, seed)?;
    let label_reads_during_training = scenario.target().withheld_label_reads() - reads_before;
    let (test_f1, transductive_f1) = target_scores(scenario, &pre.encoder, &clf.classifier, cfg)?;
    Ok(SeedResult { pretrain: pre, classifier: clf, label_reads_during_training, test_f1, transductive_f1 })
}

/// Source-only scores `(test, transductive)` for one seed.
pub fn baseline_seed(scenario: &PreparedScenario, cfg: &RunConfig, seed: u64) -> Result<(f64, f64)> {
    let out = source_only(scenario, cfg, seed)?;
    target_scores(scenario, &out.encoder, &out.classifier, cfg)
}

/// The full pipeline over every seed of `cfg`.
pub fn run_task(scenario: &PreparedScenario, cfg: &RunConfig) -> Result<MetricsReport> {
    cfg.validate()?;
    let start = Instant::now();
    let mut test = Vec::with_capacity(cfg.seeds.len());
    let mut trans = Vec::with_capacity(cfg.seeds.len());
    for &seed in &cfg.seeds {
        let r = run_seed(scenario, cfg, seed)?;
        log::info!("{} seed {seed}: target micro-F1 {:.4}", scenario.spec.task_label(), r.test_f1);
        test.push(r.test_f1);
        trans.push(r.transductive_f1);
    }
    Ok(MetricsReport::from_scores(
        scenario,
        Method::for_config(cfg),
        cfg,
        cfg.seeds.clone(),
        test,
        trans,
        start.elapsed().as_secs_f64(),
    ))
}

/// The source-only reference over every seed of `cfg`.
pub fn source_only_baseline(scenario: &PreparedScenario, cfg: &RunConfig) -> Result<MetricsReport> {
    cfg.validate()?;
    let start = Instant::now();
    let mut test = Vec::with_capacity(cfg.seeds.len());
    let mut trans = Vec::with_capacity(cfg.seeds.len());
    for &seed in &cfg.seeds {
        let (a, b) = baseline_seed(scenario, cfg, seed)?;
        log::info!("{} seed {seed}: source-only micro-F1 {a:.4}", scenario.spec.task_label());
        test.push(a);
        trans.push(b);
    }
    Ok(MetricsReport::from_scores(
        scenario,
        Method::SourceOnly,
        cfg,
        cfg.seeds.clone(),
        test,
        trans,
        start.elapsed().as_secs_f64(),
    ))
}
