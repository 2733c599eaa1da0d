//! Work distribution for independent grid nodes and Monte Carlo batches.
//!
//! Implementations may run items in any order or concurrently, but must
//! return results indexed by item; every reduction in this crate then runs
//! in index order, so results do not depend on the executor.
use alloc::vec::Vec;
use core::fmt::Debug;

use crate::Result;

pub trait Executor: Sync + Debug {
    fn map_f64(&self, n: usize, f: &(dyn Fn(usize) -> Result<f64> + Sync)) -> Vec<Result<f64>>;
    fn map_counts(&self, n: usize, f: &(dyn Fn(usize) -> Vec<u64> + Sync)) -> Vec<Vec<u64>>;
}

/// Runs everything on the calling thread.
#[derive(Clone, Copy, Debug, Default)]
pub struct Serial;

impl Executor for Serial {
    fn map_f64(&self, n: usize, f: &(dyn Fn(usize) -> Result<f64> + Sync)) -> Vec<Result<f64>> {
        (0..n).map(f).collect()
    }

    fn map_counts(&self, n: usize, f: &(dyn Fn(usize) -> Vec<u64> + Sync)) -> Vec<Vec<u64>> {
        (0..n).map(f).collect()
    }
}
