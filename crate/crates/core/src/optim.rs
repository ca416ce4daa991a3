//! Step learning-rate schedule and the Adam optimizer.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::ParamSet;

/// Constant for `constant_epochs`, then multiplied by `factor` every
/// `step_epochs`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LrSchedule {
    pub constant_epochs: usize,
    pub step_epochs: usize,
    pub factor: f64,
}

impl Default for LrSchedule {
    fn default() -> Self {
        Self {
            constant_epochs: 10,
            step_epochs: 5,
            factor: 0.1,
        }
    }
}

impl LrSchedule {
    pub fn validate(&self) -> Result<()> {
        if self.step_epochs == 0 {
            return Err(Error::config("schedule.step_epochs must be at least 1"));
        }
        if !(self.factor > 0.0 && self.factor <= 1.0) {
            return Err(Error::config(format!("schedule.factor must lie in (0, 1], got {}", self.factor)));
        }
        Ok(())
    }

    /// Number of decays applied by `epoch`.
    pub fn decays(&self, epoch: usize) -> i32 {
        if epoch < self.constant_epochs {
            0
        } else {
            ((epoch - self.constant_epochs) / self.step_epochs + 1) as i32
        }
    }

    /// Learning rate at `epoch`. Dividing by an exact power of `1 / factor`
    /// keeps the decayed rates correctly rounded (`1e-4` becomes exactly the
    /// double nearest `1e-5`, not `1e-4 * 0.1`).
    pub fn lr_at(&self, epoch: usize, base: f64) -> f64 {
        base / (1.0 / self.factor).powi(self.decays(epoch))
    }

    pub fn multiplier(&self, epoch: usize) -> f64 {
        self.lr_at(epoch, 1.0)
    }
}

/// `lr_at` under the default schedule.
pub fn lr_at(epoch: usize, base: f64) -> f64 {
    LrSchedule::default().lr_at(epoch, base)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, b) in [("optimizer.beta1", self.beta1), ("optimizer.beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::config(format!("{name} must lie in [0, 1), got {b}")));
            }
        }
        if !(self.eps > 0.0) {
            return Err(Error::config("optimizer.eps must be positive"));
        }
        Ok(())
    }
}

/// Adam state for one parameter group.
#[derive(Clone, Debug)]
pub struct Adam {
    cfg: AdamConfig,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(n: usize, cfg: AdamConfig) -> Self {
        Self {
            cfg,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn steps(&self) -> i32 {
        self.t
    }

    /// One bias-corrected update. Parameters are rounded to `f32` afterwards
    /// so that checkpoints reproduce them exactly.
    pub fn step(&mut self, params: &mut ParamSet, grads: &[f64], lr: f64) {
        assert_eq!(grads.len(), self.m.len(), "gradient length does not match the parameter group");
        self.t += 1;
        let AdamConfig { beta1, beta2, eps } = self.cfg;
        let c1 = 1.0 - beta1.powi(self.t);
        let c2 = 1.0 - beta2.powi(self.t);
        for (((p, g), m), v) in params
            .values_mut()
            .iter_mut()
            .zip(grads)
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
        }
        params.quantize_f32();
    }
}
