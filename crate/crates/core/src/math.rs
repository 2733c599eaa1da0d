//! Log-space arithmetic and the Hurwitz zeta function.
#[allow(unused_imports)]
use num_traits::Float;

pub const NEG_INF: f64 = f64::NEG_INFINITY;

/// `ln(e^a + e^b)`.
#[inline]
pub fn log_add(a: f64, b: f64) -> f64 {
    if a == NEG_INF {
        return b;
    }
    if b == NEG_INF {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// `ln(e^a - e^b)` for `a >= b`; `-inf` when the difference is not positive.
#[inline]
pub fn log_sub(a: f64, b: f64) -> f64 {
    if b == NEG_INF {
        return a;
    }
    if b >= a {
        return NEG_INF;
    }
    a + log1mexp(b - a)
}

/// `ln(1 - e^x)` for `x <= 0`, accurate on both ends.
#[inline]
pub fn log1mexp(x: f64) -> f64 {
    if x >= 0.0 {
        return NEG_INF;
    }
    if x > -core::f64::consts::LN_2 {
        (-x.exp_m1()).ln()
    } else {
        (-x.exp()).ln_1p()
    }
}

/// Log-sum-exp over an iterator with a running maximum; never exponentiates
/// anything larger than 0.
pub fn log_sum_exp<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut max = NEG_INF;
    let mut acc = 0.0f64;
    for v in values {
        if v == NEG_INF || v.is_nan() {
            continue;
        }
        if v > max {
            acc = acc * (max - v).exp() + 1.0;
            max = v;
        } else {
            acc += (v - max).exp();
        }
    }
    if max == NEG_INF {
        NEG_INF
    } else {
        max + acc.ln()
    }
}

/// Streaming log-sum-exp accumulator.
#[derive(Debug, Clone, Copy)]
pub struct LogAccumulator {
    max: f64,
    acc: f64,
}

impl Default for LogAccumulator {
    fn default() -> Self {
        Self::new()
    }
}

impl LogAccumulator {
    pub fn new() -> Self {
        Self { max: NEG_INF, acc: 0.0 }
    }

    #[inline]
    pub fn push(&mut self, v: f64) {
        if v == NEG_INF || v.is_nan() {
            return;
        }
        if v > self.max {
            self.acc = self.acc * (self.max - v).exp() + 1.0;
            self.max = v;
        } else {
            self.acc += (v - self.max).exp();
        }
    }

    pub fn value(&self) -> f64 {
        if self.max == NEG_INF {
            NEG_INF
        } else {
            self.max + self.acc.ln()
        }
    }
}

/// `ln P(X <= x)` from `ln P(X > x)`.
#[inline]
pub fn log_cdf_from_log_sf(log_sf: f64) -> f64 {
    log1mexp(log_sf)
}

// B_2, B_4, ..., B_20 divided by (2j)!.
const BERNOULLI_OVER_FACT: [f64; 10] = [
    1.0 / 6.0 / 2.0,
    -1.0 / 30.0 / 24.0,
    1.0 / 42.0 / 720.0,
    -1.0 / 30.0 / 40320.0,
    5.0 / 66.0 / 3628800.0,
    -691.0 / 2730.0 / 479001600.0,
    7.0 / 6.0 / 87178291200.0,
    -3617.0 / 510.0 / 20922789888000.0,
    43867.0 / 798.0 / 6402373705728000.0,
    -174611.0 / 330.0 / 2432902008176640000.0,
];

/// `ln ζ(s, a) = ln Σ_{k≥0} (a+k)^{-s}` for `s > 1`, `a > 0`.
///
/// Direct summation up to a shift `b = a + N >= 12 + s`, then the
/// Euler-Maclaurin tail with the `b^{1-s}` factor pulled out so the result
/// never underflows.
pub fn ln_hurwitz_zeta(s: f64, a: f64) -> f64 {
    debug_assert!(s > 1.0 && a > 0.0);
    let threshold = 12.0 + s;
    let shift = if a >= threshold { 0 } else { (threshold - a).ceil() as u64 };
    let mut acc = LogAccumulator::new();
    for k in 0..shift {
        acc.push(-s * (a + k as f64).ln());
    }
    let b = a + shift as f64;
    let inv_b2 = 1.0 / (b * b);
    let mut bracket = 1.0 / (s - 1.0) + 0.5 / b;
    // poch = s (s+1) ... (s+2j-2), power = b^{-2j}
    let mut poch = s;
    let mut power = inv_b2;
    for (j, coef) in BERNOULLI_OVER_FACT.iter().enumerate() {
        let term = coef * poch * power;
        bracket += term;
        if term.abs() < 1e-18 * bracket.abs() {
            break;
        }
        let m = 2.0 * (j as f64 + 1.0);
        poch *= (s + m - 1.0) * (s + m);
        power *= inv_b2;
    }
    acc.push((1.0 - s) * b.ln() + bracket.ln());
    acc.value()
}

/// `ln ζ(s)` for `s > 1`.
pub fn ln_riemann_zeta(s: f64) -> f64 {
    ln_hurwitz_zeta(s, 1.0)
}

/// Relative difference `|a - b| / max(|a|, |b|)`; 0 when both are 0.
pub fn rel_diff(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use core::f64::consts::PI;

    #[test]
    fn zeta_known_values() {
        assert_relative_eq!(ln_riemann_zeta(2.0).exp(), PI * PI / 6.0, max_relative = 1e-14);
        assert_relative_eq!(ln_riemann_zeta(3.0).exp(), 1.2020569031595942, max_relative = 1e-14);
        assert_relative_eq!(ln_riemann_zeta(4.0).exp(), PI.powi(4) / 90.0, max_relative = 1e-14);
        // ζ(2, 1/2) = π²/2
        assert_relative_eq!(ln_hurwitz_zeta(2.0, 0.5).exp(), PI * PI / 2.0, max_relative = 1e-14);
    }

    #[test]
    fn zeta_matches_direct_tail_sum() {
        // ζ(3, 1001) by brute force: the summand falls off as k^{-3}, so
        // sum 10^6 terms and close with the integral tail.
        let a = 1001.0f64;
        let n = 1_000_000u64;
        let mut s = 0.0;
        for k in (0..n).rev() {
            s += (a + k as f64).powi(-3);
        }
        let b = a + n as f64;
        s += 0.5 / (b * b) + 0.5 * b.powi(-3);
        assert_relative_eq!(ln_hurwitz_zeta(3.0, a).exp(), s, max_relative = 1e-12);
    }

    #[test]
    fn huge_argument_stays_finite() {
        let l = ln_hurwitz_zeta(3.0, 1e300);
        assert_relative_eq!(l, -2.0 * 1e300f64.ln() - 2.0f64.ln(), max_relative = 1e-14);
    }

    #[test]
    fn log_helpers() {
        assert_relative_eq!(log_add(0.0, 0.0), 2.0f64.ln());
        assert_relative_eq!(log_sub(2.0f64.ln(), 0.0), 0.0, epsilon = 1e-15);
        assert_eq!(log_sub(0.0, 0.0), NEG_INF);
        assert_relative_eq!(log1mexp(-1e-20), (1e-20f64).ln(), max_relative = 1e-12);
        assert_relative_eq!(log1mexp(-50.0), -(-50.0f64).exp(), max_relative = 1e-12);
        let v = log_sum_exp([-1000.0, -1000.0, NEG_INF]);
        assert_relative_eq!(v, -1000.0 + 2.0f64.ln(), max_relative = 1e-15);
        let mut acc = LogAccumulator::new();
        for v in [-3.0, 5.0, 1.0] {
            acc.push(v);
        }
        assert_relative_eq!(acc.value(), log_sum_exp([-3.0, 5.0, 1.0]), max_relative = 1e-15);
    }
}
