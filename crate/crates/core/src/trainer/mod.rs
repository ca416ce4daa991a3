//! Pretraining (VAE + contrastive), frozen-encoder classifier training, the
//! source-only baseline and target prediction.

mod baseline;
mod classifier;
mod log;
mod pool;
mod pretrain;
mod reduce;

use serde::{Deserialize, Serialize};

pub use baseline::{source_only, BaselineOutcome};
pub(crate) use classifier::check_class_coverage;
pub use classifier::{classifier_objective, predict, train_classifier, ClassifierBatch, ClassifierOutcome};
pub use log::{read_loss_log, write_loss_log, StepLog};
pub use pool::{BatchItem, MixedBatch, TrainingPool};
pub use pretrain::{pretrain, pretrain_objective, Objective, PretrainBatch, PretrainGrads, PretrainOutcome};

use crate::augment::AugmentConfig;
use crate::error::{Error, Result};
use crate::losses::SupconForm;
use crate::model::NetSpec;
use crate::optim::{AdamConfig, LrSchedule};
use crate::par::Exec;

/// Which latent feeds the classifier during its training.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LatentMode {
    #[default]
    Sample,
    Mean,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub epochs: usize,
    pub lr_encdec: f64,
    pub lr_other: f64,
    pub schedule: LrSchedule,
    pub batch_per_domain: usize,
    pub recon_weight: f64,
    pub temperature: f64,
    pub optimizer: AdamConfig,
    pub seeds: Vec<u64>,
    /// False runs the ablation without either contrastive term.
    pub contrastive: bool,
    pub supcon_form: SupconForm,
    pub latent_for_classifier: LatentMode,
    /// Epochs for the classifier stage; `None` reuses `epochs`.
    pub classifier_epochs: Option<usize>,
    pub augment: AugmentConfig,
    pub net: NetSpec,
    pub parallel: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            epochs: 20,
            lr_encdec: 1e-4,
            lr_other: 1e-3,
            schedule: LrSchedule::default(),
            batch_per_domain: 32,
            recon_weight: 1e6,
            temperature: 0.5,
            optimizer: AdamConfig::default(),
            seeds: vec![0, 1, 2],
            contrastive: true,
            supcon_form: SupconForm::Fixed,
            latent_for_classifier: LatentMode::Sample,
            classifier_epochs: None,
            augment: AugmentConfig::default(),
            net: NetSpec::default(),
            parallel: true,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("run.lr_encdec", self.lr_encdec),
            ("run.lr_other", self.lr_other),
            ("run.temperature", self.temperature),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.recon_weight >= 0.0 && self.recon_weight.is_finite()) {
            return Err(Error::config(format!("run.recon_weight must be >= 0, got {}", self.recon_weight)));
        }
        if self.epochs == 0 || self.classifier_epochs == Some(0) {
            return Err(Error::config("run.epochs must be at least 1"));
        }
        if self.batch_per_domain == 0 {
            return Err(Error::config("run.batch_per_domain must be at least 1"));
        }
        if self.seeds.is_empty() {
            return Err(Error::config("run.seeds must not be empty"));
        }
        self.schedule.validate()?;
        self.optimizer.validate()?;
        self.augment.validate()?;
        Ok(())
    }

    pub fn exec(&self) -> Exec {
        Exec::from_flag(self.parallel)
    }

    pub fn objective(&self) -> Objective {
        Objective {
            recon_weight: self.recon_weight,
            temperature: self.temperature,
            contrastive: self.contrastive,
            supcon_form: self.supcon_form,
        }
    }

    pub fn classifier_epochs(&self) -> usize {
        self.classifier_epochs.unwrap_or(self.epochs)
    }
}
