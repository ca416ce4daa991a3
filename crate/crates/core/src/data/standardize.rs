use serde::{Deserialize, Serialize};

use super::{DomainDataset, SensorWindow, Split};
use crate::error::{Error, Result};

/// Per-channel mean and standard deviation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl ChannelStats {
    /// Population statistics over every element of every window.
    pub fn fit(windows: &[SensorWindow]) -> Result<Self> {
        let first = windows
            .first()
            .ok_or_else(|| Error::DegenerateBatch("cannot fit statistics on no windows".into()))?;
        let channels = first.channels;
        let mut mean = vec![0.0; channels];
        let mut count = 0usize;
        for w in windows {
            for (ch, m) in mean.iter_mut().enumerate() {
                *m += w.channel(ch).iter().sum::<f64>();
            }
            count += w.len;
        }
        for m in &mut mean {
            *m /= count as f64;
        }
        let mut var = vec![0.0; channels];
        for w in windows {
            for (ch, v) in var.iter_mut().enumerate() {
                *v += w.channel(ch).iter().map(|x| (x - mean[ch]).powi(2)).sum::<f64>();
            }
        }
        let std = var
            .into_iter()
            .map(|v| {
                let s = (v / count as f64).sqrt();
                if s > 1e-12 {
                    s
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Self { mean, std })
    }

    pub fn apply(&self, w: &mut SensorWindow) {
        for ch in 0..w.channels {
            let (m, s) = (self.mean[ch], self.std[ch]);
            for v in &mut w.values[ch * w.len..(ch + 1) * w.len] {
                *v = (*v - m) / s;
            }
        }
    }
}

/// Fits statistics on the domain's train split and applies them to all three
/// splits. The fitted statistics are stored on the domain and returned.
pub fn standardize_domain(domain: &mut DomainDataset) -> Result<ChannelStats> {
    let stats = ChannelStats::fit(domain.split(Split::Train))?;
    for s in Split::ALL {
        for w in domain.split_mut(s).iter_mut() {
            stats.apply(w);
        }
    }
    domain.stats = Some(stats.clone());
    Ok(stats)
}
