use serde::{Deserialize, Serialize};

/// Execution strategy for data-parallel batch work.
///
/// `Parallel` uses the rayon global pool when the `parallel` feature is
/// enabled and silently degrades to sequential iteration otherwise. Results
/// are always collected in index order.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Exec {
    Sequential,
    #[default]
    Parallel,
}

impl Exec {
    pub fn from_flag(parallel: bool) -> Self {
        if parallel {
            Exec::Parallel
        } else {
            Exec::Sequential
        }
    }

    /// True when this strategy actually fans out across threads.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Exec::Parallel
    }

    pub fn map_range<R, F>(self, n: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self == Exec::Parallel {
            use rayon::prelude::*;
            return (0..n).into_par_iter().map(f).collect();
        }
        (0..n).map(f).collect()
    }

    pub fn map<T, R, F>(self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(usize, &T) -> R + Sync + Send,
    {
        self.map_range(items.len(), |i| f(i, &items[i]))
    }
}
