//! Finite-grid evidence for asymptotic statements.
//!
//! Every limit is reduced to a ratio curve `num(x)/den(x)` on a grid,
//! computed in log space, and graded by explicit [`Thresholds`] on its
//! trailing window. Verdicts are evidence, not proofs.
use alloc::string::String;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::convolve::ProductGridSpec;
use crate::grid::EvalGrid;
use crate::logtail::ext_f64;
use crate::math::{log_sum_exp, NEG_INF};
use crate::quad::QuadratureSpec;
use crate::{Error, Executor, Result};

mod classify;
mod conditions;
mod example31;
mod insensitivity;
mod verdict;

pub use classify::{classify, lattice_span, ClassId, ClassParams, ClassReport, Estimate, Membership, NamedDiagnostic};
pub use conditions::{
    check_condition, AFunction, ConditionId, ConditionParams, ConditionReport, Overall, ParameterEvidence, Quantifier,
    Requirement,
};
pub use example31::{example31_doubled_knots, example31_knot_grid};
pub use insensitivity::{build_insensitivity, InsensitivityFunction};
pub use verdict::{theorem11_verdict, Agreement, Branch, Theorem11Verdict};

/// A log-tail evaluator `x ↦ ln P(V > x)` (or any log-scale quantity).
pub type LnEval<'a> = &'a (dyn Fn(f64) -> Result<f64> + Sync);

/// Grading thresholds for ratio curves.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Thresholds {
    /// Trailing window length.
    pub window: usize,
    /// Relative spread allowed around the window mean for `ConvergesTo`.
    pub tol_c: f64,
    /// Largest `|d ln ratio|` per grid step for `ConvergesTo`; smallest for `Diverges`.
    pub tol_s: f64,
    /// Window values must stay below this for `Vanishes`.
    pub vanish_floor: f64,
    /// `Bounded` needs window max <= factor * window median.
    pub bounded_factor: f64,
    /// A little-o condition fails when the window minimum stays above this.
    pub fail_floor: f64,
    /// Largest fraction of dropped points before the curve is inconclusive.
    pub max_dropped: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            window: 8,
            tol_c: 0.05,
            tol_s: 0.01,
            vanish_floor: 1e-6,
            bounded_factor: 10.0,
            fail_floor: 1e-3,
            max_dropped: 0.25,
        }
    }
}

impl Thresholds {
    pub fn validate(&self) -> Result<()> {
        if self.window < 2 {
            return Err(Error::param("thresholds", "window", "need at least 2 points"));
        }
        for (name, v) in [
            ("tol_c", self.tol_c),
            ("tol_s", self.tol_s),
            ("vanish_floor", self.vanish_floor),
            ("fail_floor", self.fail_floor),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::param("thresholds", name, "must lie in (0, 1)"));
            }
        }
        if !(self.vanish_floor < self.fail_floor) {
            return Err(Error::param("thresholds", "vanish_floor", "must be below fail_floor"));
        }
        if !(self.bounded_factor > 1.0) {
            return Err(Error::param("thresholds", "bounded_factor", "must be > 1"));
        }
        if !(0.0..1.0).contains(&self.max_dropped) {
            return Err(Error::param("thresholds", "max_dropped", "must lie in [0, 1)"));
        }
        Ok(())
    }
}

/// Everything a diagnostic run needs besides the laws.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DiagConfig {
    pub grid: EvalGrid,
    pub thresholds: Thresholds,
    pub quad: QuadratureSpec,
    pub product: ProductGridSpec,
    pub class: ClassParams,
}

impl DiagConfig {
    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        self.thresholds.validate()?;
        self.quad.validate()?;
        self.product.validate()?;
        self.class.validate()
    }
}

/// Limit behaviour read off the trailing window.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Verdict {
    ConvergesTo(#[serde(with = "ext_f64")] f64),
    Bounded(#[serde(with = "ext_f64")] f64),
    Diverges,
    Vanishes,
    Inconclusive,
}

impl Verdict {
    pub fn limit(&self) -> Option<f64> {
        match self {
            Verdict::ConvergesTo(c) => Some(*c),
            Verdict::Vanishes => Some(0.0),
            _ => None,
        }
    }
}

/// Trailing-window statistics, all on the log scale except the slope,
/// which is the least-squares `d ln ratio` per grid step.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowStats {
    #[serde(with = "ext_f64")]
    pub ln_mean: f64,
    #[serde(with = "ext_f64")]
    pub slope: f64,
    #[serde(with = "ext_f64")]
    pub ln_min: f64,
    #[serde(with = "ext_f64")]
    pub ln_max: f64,
    #[serde(with = "ext_f64")]
    pub ln_median: f64,
    /// Median over the whole curve, for big-O comparisons.
    #[serde(with = "ext_f64")]
    pub ln_curve_median: f64,
    pub points: usize,
}

impl WindowStats {
    const EMPTY: WindowStats = WindowStats {
        ln_mean: f64::NAN,
        slope: f64::NAN,
        ln_min: f64::NAN,
        ln_max: f64::NAN,
        ln_median: f64::NAN,
        ln_curve_median: f64::NAN,
        points: 0,
    };
}

/// A ratio curve with its verdict. Dropped points carry `NaN`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioDiagnostic {
    #[serde(with = "ext_f64::vec")]
    pub x_grid: Vec<f64>,
    #[serde(with = "ext_f64::vec")]
    pub log_ratios: Vec<f64>,
    pub dropped: Vec<usize>,
    pub verdict: Verdict,
    pub window: WindowStats,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl RatioDiagnostic {
    /// Builds the diagnostic from precomputed log ratios.
    pub fn from_log_ratios(x_grid: Vec<f64>, log_ratios: Vec<f64>, th: &Thresholds) -> Self {
        let dropped: Vec<usize> = log_ratios
            .iter()
            .enumerate()
            .filter(|(_, r)| r.is_nan())
            .map(|(i, _)| i)
            .collect();
        let (verdict, window, note) = judge(&log_ratios, dropped.len(), th);
        RatioDiagnostic {
            x_grid,
            log_ratios,
            dropped,
            verdict,
            window,
            note,
        }
    }

    /// The ratio values (`exp` of the log ratios).
    pub fn ratios(&self) -> Vec<f64> {
        self.log_ratios.iter().map(|r| r.exp()).collect()
    }

    /// The last `n` valid log ratios.
    pub fn trailing(&self, n: usize) -> Vec<f64> {
        let v: Vec<f64> = self.log_ratios.iter().copied().filter(|r| !r.is_nan()).collect();
        v[v.len().saturating_sub(n)..].to_vec()
    }
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.total_cmp(b));
    let n = s.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        s[n / 2]
    } else {
        s[n / 2 - 1].midpoint(s[n / 2])
    }
}

fn ls_slope(w: &[f64]) -> f64 {
    if w.iter().any(|v| !v.is_finite()) {
        return f64::NAN;
    }
    let n = w.len() as f64;
    let mx = 0.5 * (n - 1.0);
    let my = w.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, y) in w.iter().enumerate() {
        let dx = i as f64 - mx;
        sxy += dx * (y - my);
        sxx += dx * dx;
    }
    sxy / sxx
}

/// Verdict precedence: vanishes, converges, diverges, bounded.
fn judge(r: &[f64], dropped: usize, th: &Thresholds) -> (Verdict, WindowStats, Option<String>) {
    let valid: Vec<f64> = r.iter().copied().filter(|v| !v.is_nan()).collect();
    if dropped as f64 > th.max_dropped * r.len() as f64 {
        return (
            Verdict::Inconclusive,
            WindowStats::EMPTY,
            Some(alloc::format!("{dropped} of {} points dropped (zero denominator)", r.len())),
        );
    }
    if valid.len() < th.window {
        return (
            Verdict::Inconclusive,
            WindowStats::EMPTY,
            Some(alloc::format!("{} valid points, window needs {}", valid.len(), th.window)),
        );
    }
    let w = &valid[valid.len() - th.window..];
    let n = w.len() as f64;
    let stats = WindowStats {
        ln_mean: log_sum_exp(w.iter().copied()) - n.ln(),
        slope: ls_slope(w),
        ln_min: w.iter().copied().fold(f64::INFINITY, f64::min),
        ln_max: w.iter().copied().fold(NEG_INF, f64::max),
        ln_median: median(w),
        ln_curve_median: median(&valid),
        points: valid.len(),
    };
    let finite = w.iter().all(|v| v.is_finite());
    let vanishing = w.iter().all(|&v| v <= th.vanish_floor.ln())
        && w.windows(2).all(|p| p[1] < p[0] || (p[1] == NEG_INF && p[0] == NEG_INF));
    if vanishing {
        return (Verdict::Vanishes, stats, None);
    }
    if finite {
        let c = stats.ln_mean;
        let tight = w.iter().all(|&v| ((v - c).exp() - 1.0).abs() <= th.tol_c);
        if tight && stats.slope.abs() <= th.tol_s {
            return (Verdict::ConvergesTo(c.exp()), stats, None);
        }
        if w.windows(2).all(|p| p[1] > p[0]) && stats.slope > th.tol_s {
            return (Verdict::Diverges, stats, None);
        }
    }
    if stats.ln_max <= th.bounded_factor.ln() + stats.ln_median || stats.ln_max == NEG_INF {
        return (Verdict::Bounded(stats.ln_max.exp()), stats, None);
    }
    (Verdict::Inconclusive, stats, None)
}

/// Ratio `exp(num(x) - den(x))` on `xs`. Points where the denominator is
/// zero (or either side is NaN) are dropped.
pub fn ratio_curve(num: LnEval<'_>, den: LnEval<'_>, xs: &[f64], th: &Thresholds, exec: &dyn Executor) -> Result<RatioDiagnostic> {
    th.validate()?;
    let vals = exec.map_f64(xs.len(), &|i| {
        let d = den(xs[i])?;
        if d == NEG_INF || d.is_nan() {
            return Ok(f64::NAN);
        }
        let n = num(xs[i])?;
        Ok(if n.is_nan() { f64::NAN } else { n - d })
    });
    let r: Vec<f64> = vals.into_iter().collect::<Result<_>>()?;
    Ok(RatioDiagnostic::from_log_ratios(xs.to_vec(), r, th))
}

/// Shift-ratio curve `V̄(x + offset(x))/V̄(x)`, evaluated as one stable
/// log difference; points with `V̄(x) = 0` are dropped.
pub(crate) fn shift_ratio_curve(
    v: &crate::dist::Distribution,
    offset: &(dyn Fn(f64) -> f64 + Sync),
    xs: &[f64],
    th: &Thresholds,
    exec: &dyn Executor,
) -> Result<RatioDiagnostic> {
    ratio_curve(
        &|x| Ok(v.ln_sf_shift_ratio(x, offset(x))),
        &|x| Ok(if v.ln_sf(x) == NEG_INF { NEG_INF } else { 0.0 }),
        xs,
        th,
        exec,
    )
}

#[cfg(test)]
mod tests;
