//! Adaptive Gauss-Kronrod (G7/K15) quadrature of integrands given by their
//! logarithm.
//!
//! Panel sums are kept relative to a fixed reference exponent, so integrands
//! of size `e^-700` and below are handled without underflow.
use alloc::collections::BinaryHeap;
use alloc::vec::Vec;
use core::cmp::Ordering;

#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::math::{log_sum_exp, NEG_INF};
use crate::{Error, Result};

/// Accuracy budget for one tail evaluation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    /// Relative tolerance on the probability.
    pub rel_tol: f64,
    pub max_panels: usize,
    /// Probability mass, relative to a lower bound of the result, that may be
    /// cut from unbounded integration domains.
    pub truncation_tail: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            rel_tol: 1e-8,
            max_panels: 1 << 16,
            truncation_tail: 1e-16,
        }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.rel_tol < 1.0) {
            return Err(Error::param("quadrature", "rel_tol", "must lie in (0, 1)"));
        }
        if !(self.truncation_tail >= 0.0 && self.truncation_tail < 1.0) {
            return Err(Error::param("quadrature", "truncation_tail", "must lie in [0, 1)"));
        }
        if self.max_panels < 16 {
            return Err(Error::param("quadrature", "max_panels", "must be at least 16"));
        }
        Ok(())
    }
}

/// `ln` of an integral and of its estimated absolute error.
#[derive(Clone, Copy, Debug)]
pub(crate) struct LogIntegral {
    pub ln_value: f64,
    pub ln_err: f64,
}

impl LogIntegral {
    pub const ZERO: LogIntegral = LogIntegral {
        ln_value: NEG_INF,
        ln_err: NEG_INF,
    };
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
// Gauss weights at XGK[1], XGK[3], XGK[5], XGK[7]
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Clone, Copy, Debug)]
struct Panel {
    a: f64,
    b: f64,
    val: f64,
    err: f64,
}

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Panel {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut lv = [NEG_INF; 15];
    for i in 0..7 {
        lv[2 * i] = f(c - h * XGK[i]);
        lv[2 * i + 1] = f(c + h * XGK[i]);
    }
    lv[14] = f(c);
    for v in &mut lv {
        if v.is_nan() {
            *v = NEG_INF;
        }
    }
    let m = lv.iter().copied().fold(NEG_INF, f64::max);
    if m == NEG_INF {
        return Panel { a, b, val: NEG_INF, err: NEG_INF };
    }
    let e = |v: f64| (v - m).exp();
    let mut k = WGK[7] * e(lv[14]);
    let mut g = WG[3] * e(lv[14]);
    for i in 0..7 {
        let s = e(lv[2 * i]) + e(lv[2 * i + 1]);
        k += WGK[i] * s;
        if i % 2 == 1 {
            g += WG[i / 2] * s;
        }
    }
    let val = m + (k * h).ln();
    let diff = ((k - g) * h).abs();
    // floor at a few ulps of the panel value
    let err = m + diff.max(k * h * 4.0 * f64::EPSILON).ln();
    Panel { a, b, val, err }
}

#[derive(PartialEq)]
struct ByErr(f64, usize);
impl Eq for ByErr {}
impl PartialOrd for ByErr {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for ByErr {
    fn cmp(&self, o: &Self) -> Ordering {
        self.0.total_cmp(&o.0).then(self.1.cmp(&o.1))
    }
}

/// Integrates `exp(lnf)` over `[breaks[0], breaks[last]]`, splitting at every
/// break. Stops when the error estimate is below `rel_tol` times the value or
/// below `exp(ln_abs_floor)`.
pub(crate) fn integrate_log<F: Fn(f64) -> f64>(
    lnf: F,
    breaks: &[f64],
    spec: &QuadratureSpec,
    ln_abs_floor: f64,
) -> Result<LogIntegral> {
    let mut pts: Vec<f64> = breaks.iter().copied().filter(|b| b.is_finite()).collect();
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    if pts.len() < 2 {
        return Ok(LogIntegral::ZERO);
    }
    let span = pts[pts.len() - 1] - pts[0];
    let budget = (spec.max_panels / 4).max(pts.len());
    let width = (span / budget as f64).max(0.25);
    let mut panels: Vec<Panel> = Vec::new();
    for w in pts.windows(2) {
        let (a, b) = (w[0], w[1]);
        if !(b > a) {
            continue;
        }
        let k = ((b - a) / width).ceil().max(1.0) as usize;
        for i in 0..k {
            let pa = a + (b - a) * i as f64 / k as f64;
            let pb = if i + 1 == k { b } else { a + (b - a) * (i + 1) as f64 / k as f64 };
            panels.push(gk15(&lnf, pa, pb));
        }
    }
    let reference = panels.iter().map(|p| p.val).fold(NEG_INF, f64::max);
    if reference == NEG_INF {
        return Ok(LogIntegral::ZERO);
    }
    let lin = |v: f64| (v - reference).exp();
    let mut tot_val: f64 = panels.iter().map(|p| lin(p.val)).sum();
    let mut tot_err: f64 = panels.iter().map(|p| lin(p.err)).sum();
    let mut heap: BinaryHeap<ByErr> = panels.iter().enumerate().map(|(i, p)| ByErr(p.err, i)).collect();
    let abs_floor = lin(ln_abs_floor);
    let mut iter = 0usize;
    loop {
        let target = (spec.rel_tol * tot_val).max(abs_floor);
        if tot_err <= target {
            break;
        }
        if panels.len() + 2 > spec.max_panels {
            let ln_value = reference + tot_val.max(0.0).ln();
            return Err(Error::NotConverged {
                partial_log: ln_value,
                achieved_rel: tot_err / tot_val,
            });
        }
        let Some(ByErr(_, idx)) = heap.pop() else { break };
        let p = panels[idx];
        let mid = 0.5 * (p.a + p.b);
        if !(mid > p.a && mid < p.b) || p.b - p.a < 1e-13 * (1.0 + p.a.abs()) {
            // unsplittable: accept its error as final
            let e = lin(p.err);
            tot_err -= e;
            panels[idx].err = NEG_INF;
            if tot_err <= 0.0 {
                tot_err = 0.0;
            }
            continue;
        }
        let l = gk15(&lnf, p.a, mid);
        let r = gk15(&lnf, mid, p.b);
        tot_val += lin(l.val) + lin(r.val) - lin(p.val);
        tot_err += lin(l.err) + lin(r.err) - lin(p.err);
        panels[idx] = l;
        heap.push(ByErr(l.err, idx));
        panels.push(r);
        heap.push(ByErr(r.err, panels.len() - 1));
        iter += 1;
        if iter.is_multiple_of(512) {
            tot_val = panels.iter().map(|p| lin(p.val)).sum();
            tot_err = panels.iter().map(|p| lin(p.err)).sum();
        }
    }
    Ok(LogIntegral {
        ln_value: log_sum_exp(panels.iter().map(|p| p.val)),
        ln_err: log_sum_exp(panels.iter().map(|p| p.err)),
    })
}
