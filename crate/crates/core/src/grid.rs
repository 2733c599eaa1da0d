//! Evaluation grids for ratio diagnostics.
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EvalGrid {
    /// `x_k = x0 ρ^k`, `k = 0..count`.
    Geometric { x0: f64, rho: f64, count: usize },
    /// Strictly increasing explicit points.
    Explicit { points: Vec<f64> },
}

impl Default for EvalGrid {
    fn default() -> Self {
        EvalGrid::Geometric {
            x0: 10.0,
            rho: 1.5,
            count: 40,
        }
    }
}

impl EvalGrid {
    pub fn geometric(x0: f64, rho: f64, count: usize) -> Self {
        EvalGrid::Geometric { x0, rho, count }
    }

    /// Geometric grid with `count` points from `x0` to `x1`.
    pub fn spanning(x0: f64, x1: f64, count: usize) -> Self {
        let rho = (x1 / x0).powf(1.0 / (count.max(2) - 1) as f64);
        EvalGrid::Geometric { x0, rho, count }
    }

    pub fn explicit(points: Vec<f64>) -> Self {
        EvalGrid::Explicit { points }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            EvalGrid::Geometric { x0, rho, count } => {
                if !(x0.is_finite() && *x0 > 0.0) {
                    return Err(Error::param("grid", "x0", "must be finite and > 0"));
                }
                if !(rho.is_finite() && *rho > 1.0) {
                    return Err(Error::param("grid", "rho", "must be > 1"));
                }
                if *count < 2 {
                    return Err(Error::param("grid", "count", "need at least 2 points"));
                }
                if !(x0 * rho.powi(*count as i32 - 1)).is_finite() {
                    return Err(Error::param("grid", "count", "last point overflows"));
                }
            }
            EvalGrid::Explicit { points } => {
                if points.len() < 2 {
                    return Err(Error::param("grid", "points", "need at least 2 points"));
                }
                if points.windows(2).any(|w| !(w[1] > w[0])) || points.iter().any(|p| !p.is_finite()) {
                    return Err(Error::param("grid", "points", "must be finite and strictly increasing"));
                }
            }
        }
        Ok(())
    }

    pub fn points(&self) -> Vec<f64> {
        match self {
            EvalGrid::Geometric { x0, rho, count } => (0..*count).map(|k| x0 * rho.powi(k as i32)).collect(),
            EvalGrid::Explicit { points } => points.clone(),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            EvalGrid::Geometric { count, .. } => *count,
            EvalGrid::Explicit { points } => points.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// The same grid with every point multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        match self {
            EvalGrid::Geometric { x0, rho, count } => EvalGrid::Geometric {
                x0: x0 * c,
                rho: *rho,
                count: *count,
            },
            EvalGrid::Explicit { points } => EvalGrid::Explicit {
                points: points.iter().map(|p| p * c).collect(),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_reaches_7e7() {
        let p = EvalGrid::default().points();
        assert_eq!(p.len(), 40);
        assert!((p[39] / 7.387e7 - 1.0).abs() < 0.01);
        let s = EvalGrid::spanning(10.0, 1000.0, 40).points();
        assert!((s[39] - 1000.0).abs() < 1e-9);
    }

    #[test]
    fn validation() {
        assert!(EvalGrid::geometric(10.0, 1.0, 40).validate().is_err());
        assert!(EvalGrid::explicit(alloc::vec![1.0, 1.0]).validate().is_err());
        assert!(EvalGrid::default().validate().is_ok());
    }
}
