use alloc::format;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use super::{classify, ClassId, DiagConfig, Membership};
use crate::dist::Distribution;
use crate::{Error, Executor, Result};

/// A tabulated `a(x)` with `a` non-decreasing, `a(x)/x` non-increasing
/// and `a(x) <= √x` at the nodes.
///
/// Between nodes `a(x) = min(a_{i+1}, a_i x/x_i)`; below the first node
/// `a/x` is held constant, above the last `a` grows like `√x`. Both
/// monotonicity properties hold everywhere.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InsensitivityFunction {
    pub xs: Vec<f64>,
    pub a: Vec<f64>,
    pub delta: f64,
}

impl InsensitivityFunction {
    pub fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x <= self.xs[0] {
            return self.a[0] * x / self.xs[0];
        }
        if x >= self.xs[n - 1] {
            return self.a[n - 1] * (x / self.xs[n - 1]).sqrt();
        }
        let i = self.xs.partition_point(|&p| p <= x) - 1;
        self.a[i + 1].min(self.a[i] * x / self.xs[i])
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |r: &str| Err(Error::param("insensitivity", "a", alloc::string::String::from(r)));
        if self.xs.len() < 2 || self.xs.len() != self.a.len() {
            return bad("need matching node and value arrays of length >= 2");
        }
        if self.xs.windows(2).any(|w| !(w[1] > w[0])) || !(self.xs[0] > 0.0) {
            return bad("nodes must be positive and strictly increasing");
        }
        if self.a.iter().any(|a| !(*a > 0.0)) {
            return bad("values must be positive");
        }
        for i in 1..self.xs.len() {
            let slack = 1.0 + 1e-12;
            if self.a[i] * slack < self.a[i - 1] || self.a[i] / self.xs[i] > slack * self.a[i - 1] / self.xs[i - 1] {
                return bad("a must be non-decreasing with a(x)/x non-increasing");
            }
        }
        Ok(())
    }
}

/// Largest `a <= √x` with `F̄(x - a)/F̄(x) <= 1 + delta` at each grid node,
/// then made monotone (running max of `a`, running min of `a/x`).
///
/// Refuses laws whose shift ratio does not settle at `γ̂ ≈ 0`.
pub fn build_insensitivity(f: &Distribution, delta: f64, cfg: &DiagConfig, exec: &dyn Executor) -> Result<InsensitivityFunction> {
    if !(delta > 0.0 && delta <= 0.5) {
        return Err(Error::param("insensitivity", "delta", "must lie in (0, 0.5]"));
    }
    let lt = classify(f, ClassId::LGamma, cfg, exec)?;
    let gamma = lt.estimate("gamma");
    match (lt.membership, gamma) {
        (Membership::Member, Some(g)) if g.abs() <= cfg.class.long_tail_gamma => {}
        _ => {
            return Err(Error::PremiseFailed(format!(
                "{} is not long-tailed on the grid: verdict {:?}, gamma estimate {:?}",
                f.label(),
                lt.evidence[0].diagnostic.verdict,
                gamma
            )))
        }
    }
    let xs = cfg.grid.points();
    let target = delta.ln_1p();
    let raw = exec.map_f64(xs.len(), &|i| {
        let x = xs[i];
        if f.ln_sf(x) == f64::NEG_INFINITY {
            return Err(Error::GridExhausted(format!("tail of {} vanishes at x = {x}", f.label())));
        }
        let ratio = |a: f64| f.ln_sf_shift_ratio(x, -a);
        let cap = x.sqrt();
        if ratio(cap) <= target {
            return Ok(cap);
        }
        let (mut lo, mut hi) = (0.0, cap);
        for _ in 0..100 {
            let m = 0.5 * (lo + hi);
            if ratio(m) <= target {
                lo = m;
            } else {
                hi = m;
            }
        }
        Ok(lo)
    });
    let mut a: Vec<f64> = raw.into_iter().collect::<Result<_>>()?;
    for i in 1..a.len() {
        a[i] = a[i].max(a[i - 1]);
    }
    let mut slope = f64::INFINITY;
    for i in 0..a.len() {
        slope = slope.min(a[i] / xs[i]);
        a[i] = xs[i] * slope;
    }
    if a.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::PremiseFailed(format!(
            "{} admits no positive shift within 1 + {delta} at the first grid node",
            f.label()
        )));
    }
    let out = InsensitivityFunction { xs, a, delta };
    out.validate()?;
    Ok(out)
}
