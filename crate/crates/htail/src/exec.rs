//! Thread-pool executor.
//!
//! Items may finish in any order; results are always collected by index,
//! so every reduction is independent of the worker count.
use htail_core::{Executor, Result};
use rayon::prelude::*;

/// Environment variable holding the default worker count.
pub const THREADS_ENV: &str = "HTAIL_THREADS";

#[derive(Debug)]
pub struct RayonExecutor {
    pool: rayon::ThreadPool,
}

impl RayonExecutor {
    pub fn new(threads: usize) -> anyhow::Result<Self> {
        anyhow::ensure!(threads >= 1, "thread count must be >= 1");
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build()?;
        Ok(RayonExecutor { pool })
    }

    /// Worker count from [`THREADS_ENV`], else the available parallelism.
    pub fn default_threads() -> anyhow::Result<usize> {
        match std::env::var(THREADS_ENV) {
            Ok(s) => {
                let n: usize = s
                    .trim()
                    .parse()
                    .map_err(|_| anyhow::anyhow!("{THREADS_ENV}={s:?} is not a positive integer"))?;
                anyhow::ensure!(n >= 1, "{THREADS_ENV} must be >= 1");
                Ok(n)
            }
            Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
        }
    }

    pub fn threads(&self) -> usize {
        self.pool.current_num_threads()
    }

    /// Ordered parallel map.
    pub fn map<T: Send>(&self, n: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
        self.pool.install(|| (0..n).into_par_iter().map(f).collect())
    }
}

impl Executor for RayonExecutor {
    fn map_f64(&self, n: usize, f: &(dyn Fn(usize) -> Result<f64> + Sync)) -> Vec<Result<f64>> {
        self.map(n, f)
    }

    fn map_counts(&self, n: usize, f: &(dyn Fn(usize) -> Vec<u64> + Sync)) -> Vec<Vec<u64>> {
        self.map(n, f)
    }
}
