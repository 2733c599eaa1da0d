//! Sums `Σ_{n=p}^{q} exp(lnf(n))` over integer lattices.
//!
//! Terms are added directly while consecutive terms differ by more than 1%
//! (or the log-step itself changes by more than 1e-4);
//! the slowly varying remainder uses the midpoint Euler-Maclaurin formula
//! `Σ_{n=a}^{b} f(n) ≈ ∫_{a-½}^{b+½} f + [f'(a-½) - f'(b+½)]/24`.
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::math::{log_add, log_sub, LogAccumulator, NEG_INF};
use crate::quad::{integrate_log, QuadratureSpec};
use crate::{Error, Result};

const SLOW_STEP: f64 = 0.00995; // ln 1.01
const SLOW_CURVE: f64 = 1e-4;
const MAX_DIRECT: u64 = 4_000_000;
const MIN_BLOCK: u64 = 64;

/// Both the step and its change are small on `[n, n + 2]`.
fn slow(lnf: &impl Fn(f64) -> f64, n: f64) -> bool {
    let (a, b, c) = (lnf(n), lnf(n + 1.0), lnf(n + 2.0));
    let d1 = b - a;
    let d2 = c - 2.0 * b + a;
    d1.is_finite() && d2.is_finite() && d1.abs() <= SLOW_STEP && d2.abs() <= SLOW_CURVE
}

/// First `n` in `[from, to]` (stepping by `dir`) with finite `lnf(n)`,
/// assuming the finite region is an interval.
fn skip_zeros(lnf: &impl Fn(f64) -> f64, from: f64, to: f64, dir: f64) -> Option<f64> {
    let inside = |n: f64| if dir > 0.0 { n <= to } else { n >= to };
    if !inside(from) {
        return None;
    }
    if lnf(from) > NEG_INF {
        return Some(from);
    }
    let mut last_zero = from;
    let mut step = 1.0;
    loop {
        let n = from + dir * step;
        if !inside(n) {
            if lnf(to) == NEG_INF {
                return None;
            }
            break;
        }
        if lnf(n) > NEG_INF {
            break;
        }
        last_zero = n;
        step *= 2.0;
        if step > 9.0e15 {
            return None;
        }
    }
    let mut hit = from + dir * step;
    if !inside(hit) {
        hit = to;
    }
    while (hit - last_zero).abs() > 1.0 {
        let mid = (0.5 * (hit + last_zero)).floor();
        let mid = if mid == last_zero { last_zero + dir } else { mid };
        if lnf(mid) > NEG_INF {
            hit = mid;
        } else {
            last_zero = mid;
        }
    }
    Some(hit)
}

fn dlnf(lnf: &impl Fn(f64) -> f64, t: f64) -> f64 {
    let h = 1e-4 * t.abs().max(1.0);
    (lnf(t + h) - lnf(t - h)) / (2.0 * h)
}

/// `ln ∫_a^b exp(lnf(t)) dt` with `b` possibly infinite (then `lnf` must decay
/// at least like `t^{-decay}`, `decay > 1`).
fn log_integral(lnf: &impl Fn(f64) -> f64, a: f64, b: f64, decay: f64, ln_ref: f64, spec: &QuadratureSpec) -> Result<f64> {
    let la = a.ln();
    let lb = if b.is_finite() {
        b.ln()
    } else {
        // cut where the t^{-decay} tail bound is negligible
        let mut t = (2.0 * a).max(a + 64.0);
        let ln_gap = ln_ref + (spec.rel_tol * 1e-6).ln();
        loop {
            let tail = lnf(t) + t.ln() - (decay - 1.0).ln();
            if !(tail > ln_gap) || t > 1e300 {
                break;
            }
            t *= 2.0;
        }
        t.ln()
    };
    let n = ((lb - la) / 0.5).ceil().max(1.0) as usize;
    let breaks: Vec<f64> = (0..=n).map(|i| la + (lb - la) * i as f64 / n as f64).collect();
    let floor = ln_ref + (0.1 * spec.rel_tol).ln();
    let r = integrate_log(|s: f64| lnf(s.exp()) + s, &breaks, spec, floor)?;
    Ok(r.ln_value)
}

/// `ln Σ_{n=p}^{q} exp(lnf(n))` for a smooth `lnf` defined on reals.
/// `q = None` means an infinite range; `decay` is then a power-law decay
/// exponent (> 1) that bounds the far tail.
pub(crate) fn smooth_sum(lnf: impl Fn(f64) -> f64, p: u64, q: Option<u64>, decay: f64, spec: &QuadratureSpec) -> Result<f64> {
    let qf = q.map(|q| q as f64).unwrap_or(f64::INFINITY);
    let mut acc = LogAccumulator::new();
    let Some(mut lo) = skip_zeros(&lnf, p as f64, qf, 1.0) else {
        return Ok(NEG_INF);
    };
    let mut hi = qf;
    if qf.is_finite() {
        match skip_zeros(&lnf, qf, lo, -1.0) {
            Some(h) => hi = h,
            None => return Ok(NEG_INF),
        }
    }
    let mut direct = 0u64;
    while lo <= hi && !slow(&lnf, lo) && direct < MAX_DIRECT {
        acc.push(lnf(lo));
        lo += 1.0;
        direct += 1;
    }
    if hi.is_finite() {
        while hi >= lo && !slow(&lnf, hi - 2.0) && direct < MAX_DIRECT {
            acc.push(lnf(hi));
            hi -= 1.0;
            direct += 1;
        }
    }
    if lo > hi {
        return Ok(acc.value());
    }
    if hi - lo < MIN_BLOCK as f64 {
        let mut n = lo;
        while n <= hi {
            acc.push(lnf(n));
            n += 1.0;
        }
        return Ok(acc.value());
    }
    let a = lo - 0.5;
    let b = hi + 0.5;
    let ln_ref = log_add(acc.value(), lnf(lo)).max(lnf(hi));
    let ln_ref = if ln_ref.is_finite() { ln_ref } else { lnf(0.5 * (lo + hi.min(lo * 4.0))) };
    let integral = log_integral(&lnf, a, b, decay, ln_ref, spec)?;
    // f'(a)/24 - f'(b)/24 with f' = f (ln f)'
    let mut corr = 0.0f64;
    let scale = log_add(acc.value(), integral);
    for (t, sign) in [(a, 1.0), (b, -1.0)] {
        if t.is_finite() {
            let lf = lnf(t);
            let d = dlnf(&lnf, t);
            if lf.is_finite() && d.is_finite() {
                corr += sign * d * (lf - scale).exp() / 24.0;
            }
        }
    }
    let total = log_add(acc.value(), integral);
    Ok(if corr >= 0.0 {
        log_add(total, scale + corr.ln())
    } else {
        log_sub(total, scale + (-corr).ln())
    })
}

/// `ln Σ_{n=p}^{q} exp(lnf(n))` term by term, for step-like `lnf`.
/// `ln_rest(n)` returns `ln Σ_{m>n}` or a bound on it, flagged `true` when
/// exact; summation stops once the rest is exact or below the tolerance.
pub(crate) fn direct_sum(
    lnf: impl Fn(f64) -> f64,
    p: u64,
    q: Option<u64>,
    ln_rest: impl Fn(u64) -> (f64, bool),
    spec: &QuadratureSpec,
) -> Result<f64> {
    let mut acc = LogAccumulator::new();
    let mut n = p;
    let end = q.unwrap_or(u64::MAX);
    let mut count = 0u64;
    let ln_tol = (0.1 * spec.rel_tol).ln();
    while n <= end {
        acc.push(lnf(n as f64));
        count += 1;
        if q.is_none() || count.is_multiple_of(64) {
            let (rest, exact) = ln_rest(n);
            if exact || rest == NEG_INF || rest < acc.value() + ln_tol {
                if q.is_none() {
                    return Ok(log_add(acc.value(), rest));
                }
                return Ok(acc.value());
            }
        }
        if count >= MAX_DIRECT {
            return Err(Error::NotConverged {
                partial_log: acc.value(),
                achieved_rel: (ln_rest(n).0 - acc.value()).exp(),
            });
        }
        n += 1;
    }
    Ok(acc.value())
}
