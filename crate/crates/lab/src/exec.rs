use std::ops::Range;

use lrp_core::exec::Executor;
use rayon::prelude::*;

use crate::error::{LabError, LabResult};

/// Work-stealing executor on a dedicated rayon pool. Results come back in
/// input order, so output does not depend on the worker count.
pub struct RayonExecutor {
    pool: rayon::ThreadPool,
}

impl RayonExecutor {
    /// `workers = 0` uses the available parallelism.
    pub fn new(workers: usize) -> LabResult<Self> {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build().map_err(|e| LabError::Internal(e.to_string()))?;
        Ok(Self { pool })
    }

    pub fn workers(&self) -> usize {
        self.pool.current_num_threads()
    }
}

impl Executor for RayonExecutor {
    fn map<T, F>(&self, items: &[Range<u64>], f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(Range<u64>) -> T + Sync + Send,
    {
        self.pool.install(|| items.par_iter().cloned().map(&f).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use lrp_core::exec::{fold_replicas, Sequential};

    #[test]
    fn matches_sequential_bitwise() {
        let f = |acc: &mut f64, i: u64| *acc += 1.0 / (i as f64 + 1.0).sqrt();
        let a = fold_replicas(&Sequential, 0..10_000, || 0.0, f, |a, b| *a += b);
        let b = fold_replicas(&RayonExecutor::new(3).unwrap(), 0..10_000, || 0.0, f, |a, b| *a += b);
        assert_eq!(a.to_bits(), b.to_bits());
    }
}
