//! Execution policy for the data-parallel inner loops.
//!
//! Every parallel loop in the crate goes through [`Execution`], which maps an
//! index range to an ordered `Vec`. Results are collected in index order, so
//! serial and parallel runs produce identical output as long as each item's
//! computation only depends on its own index (random streams are split per
//! index for that reason). Without the `parallel` feature, `Parallel` runs
//! serially.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub enum Execution {
    Serial,
    #[default]
    Parallel,
}

impl Execution {
    /// Whether this policy actually fans out to a thread pool.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }

    pub fn map_range<T, F>(self, len: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            return (0..len).into_par_iter().map(f).collect();
        }
        (0..len).map(f).collect()
    }

    pub fn map_slice<A, T, F>(self, items: &[A], f: F) -> Vec<T>
    where
        A: Sync,
        T: Send,
        F: Fn(usize, &A) -> T + Sync + Send,
    {
        self.map_range(items.len(), |i| f(i, &items[i]))
    }
}
