use rand::seq::SliceRandom;

use crate::data::{PreparedScenario, Role, SensorWindow, Split};
use crate::error::{Error, Result};
use crate::rng;

struct PoolDomain<'a> {
    windows: &'a [SensorWindow],
    labeled: bool,
}

/// Train-split windows of every participating domain with one cyclic
/// sampler each.
///
/// A sampler visits its domain in a shuffled order and reshuffles when the
/// order is exhausted. Orders are derived from `(seed, domain, cycle)`, so
/// the batch at any step can be rebuilt without replaying earlier steps.
pub struct TrainingPool<'a> {
    domains: Vec<PoolDomain<'a>>,
    batch_per_domain: usize,
    seed: u64,
}

#[derive(Clone, Copy, Debug)]
pub struct BatchItem<'a> {
    pub window: &'a SensorWindow,
    pub domain: usize,
    pub label: Option<u16>,
}

/// `batch_per_domain` instances from each domain in pool order.
#[derive(Clone, Debug)]
pub struct MixedBatch<'a> {
    pub items: Vec<BatchItem<'a>>,
}

impl MixedBatch<'_> {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn inputs(&self) -> Vec<&[f64]> {
        self.items.iter().map(|it| it.window.values.as_slice()).collect()
    }

    pub fn labels(&self) -> Vec<Option<u16>> {
        self.items.iter().map(|it| it.label).collect()
    }
}

impl<'a> TrainingPool<'a> {
    /// Every source domain followed by the unlabeled target.
    pub fn new(scenario: &'a PreparedScenario, batch_per_domain: usize, seed: u64) -> Result<Self> {
        if scenario.sources().is_empty() {
            return Err(Error::config("a scenario needs at least one source domain"));
        }
        let domains = scenario
            .domains
            .iter()
            .map(|d| (d.split(Split::Train), d.role() == Role::Source))
            .collect();
        Self::from_domains(domains, batch_per_domain, seed)
    }

    /// Source domains only.
    pub fn sources_only(scenario: &'a PreparedScenario, batch_per_domain: usize, seed: u64) -> Result<Self> {
        let domains: Vec<_> = scenario.sources().into_iter().map(|d| (d.split(Split::Train), true)).collect();
        if domains.is_empty() {
            return Err(Error::config("a scenario needs at least one source domain"));
        }
        Self::from_domains(domains, batch_per_domain, seed)
    }

    pub fn from_domains(domains: Vec<(&'a [SensorWindow], bool)>, batch_per_domain: usize, seed: u64) -> Result<Self> {
        if batch_per_domain == 0 {
            return Err(Error::config("batch_per_domain must be at least 1"));
        }
        if let Some(i) = domains.iter().position(|(w, _)| w.is_empty()) {
            return Err(Error::EmptyDomain(format!("pool domain {i}")));
        }
        if domains.is_empty() {
            return Err(Error::config("a training pool needs at least one domain"));
        }
        Ok(Self {
            domains: domains
                .into_iter()
                .map(|(windows, labeled)| PoolDomain { windows, labeled })
                .collect(),
            batch_per_domain,
            seed,
        })
    }

    pub fn n_domains(&self) -> usize {
        self.domains.len()
    }

    pub fn batch_size(&self) -> usize {
        self.batch_per_domain * self.domains.len()
    }

    /// Steps per epoch: enough for one pass over the largest domain.
    pub fn epoch_len(&self) -> usize {
        let largest = self.domains.iter().map(|d| d.windows.len()).max().unwrap_or(0);
        largest.div_ceil(self.batch_per_domain)
    }

    fn order(&self, domain: usize, cycle: usize) -> Vec<usize> {
        let n = self.domains[domain].windows.len();
        let mut idx: Vec<usize> = (0..n).collect();
        let mut r = rng::stream(self.seed, "sampler", &[domain as u64, cycle as u64]);
        idx.shuffle(&mut r);
        idx
    }

    /// The mixed batch for global step `step`.
    pub fn batch(&self, step: usize) -> MixedBatch<'a> {
        let b = self.batch_per_domain;
        let mut items = Vec::with_capacity(self.batch_size());
        for (d, dom) in self.domains.iter().enumerate() {
            let n = dom.windows.len();
            let mut cached: Option<(usize, Vec<usize>)> = None;
            for k in 0..b {
                let pos = step * b + k;
                let cycle = pos / n;
                if cached.as_ref().is_none_or(|(c, _)| *c != cycle) {
                    cached = Some((cycle, self.order(d, cycle)));
                }
                let w = &dom.windows[cached.as_ref().unwrap().1[pos % n]];
                let label = if dom.labeled { w.label() } else { None };
                items.push(BatchItem { window: w, domain: d, label });
            }
        }
        MixedBatch { items }
    }
}
