use std::collections::BTreeMap;

use rand::seq::SliceRandom;

use super::SensorWindow;
use crate::error::{Error, Result};
use crate::rng;

/// Train/val/test proportions.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self {
            train: 0.6,
            val: 0.2,
            test: 0.2,
        }
    }
}

impl SplitRatios {
    pub fn validate(&self) -> Result<()> {
        let all = [self.train, self.val, self.test];
        if all.iter().any(|r| !(0.0..=1.0).contains(r)) || (all.iter().sum::<f64>() - 1.0).abs() > 1e-9
        {
            return Err(Error::config(format!(
                "split ratios must be in [0, 1] and sum to 1, got {all:?}"
            )));
        }
        Ok(())
    }

    /// Per-split counts for a class of `n` windows. Val and test take their
    /// rounded share (at least one each), train takes the rest.
    fn counts(&self, n: usize) -> (usize, usize, usize) {
        let share = |r: f64| ((n as f64 * r).round() as usize).max(usize::from(r > 0.0));
        let val = share(self.val);
        let test = share(self.test);
        (n - val - test, val, test)
    }
}

/// Stratified, seeded split. Each class is shuffled independently and cut by
/// [`SplitRatios`]; every split keeps the windows' original relative order.
/// `class_names` is only used to name a class in error messages.
pub fn split(
    windows: Vec<SensorWindow>,
    ratios: SplitRatios,
    seed: u64,
    class_names: &[String],
) -> Result<[Vec<SensorWindow>; 3]> {
    ratios.validate()?;
    let mut by_class: BTreeMap<u16, Vec<usize>> = BTreeMap::new();
    for (i, w) in windows.iter().enumerate() {
        let label = w
            .label()
            .ok_or_else(|| Error::DegenerateBatch("cannot stratify unlabeled windows".into()))?;
        by_class.entry(label).or_default().push(i);
    }

    let mut assignment = vec![0u8; windows.len()];
    for (&label, idx) in &by_class {
        if idx.len() < 3 {
            let class = class_names
                .get(label as usize)
                .cloned()
                .unwrap_or_else(|| label.to_string());
            return Err(Error::Stratification {
                class,
                count: idx.len(),
            });
        }
        let mut shuffled = idx.clone();
        shuffled.shuffle(&mut rng::stream(seed, "split", &[u64::from(label)]));
        let (train, val, _) = ratios.counts(shuffled.len());
        for (k, &i) in shuffled.iter().enumerate() {
            assignment[i] = if k < train {
                0
            } else if k < train + val {
                1
            } else {
                2
            };
        }
    }

    let mut out: [Vec<SensorWindow>; 3] = Default::default();
    for (w, a) in windows.into_iter().zip(assignment) {
        out[a as usize].push(w);
    }
    Ok(out)
}
