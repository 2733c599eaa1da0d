//! Tails of products `XY` and of k-fold sums of independent nonnegative
//! laws, gridded product laws, and a Monte Carlo oracle for products.
//!
//! A product tail is split by where the mass sits:
//!
//! `H̄(x) = Σ_{G atoms y} m_y F̄(x/y) + Σ_{F atoms d} m_d Ḡ_c(x/d)
//!        + ∫ F̄_c(x/y) g_c(y) dy`,
//!
//! with `F̄_c`, `Ḡ_c` the tails of the continuous parts. The roles of `F`
//! and `G` are swapped when only `G` is tabulated, so the integral always
//! runs against an analytic density where one exists.
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::dist::{tau_at, x_at_tau, AtomSet, Distribution, GriddedDistribution};
use crate::latsum::{direct_sum, smooth_sum};
use crate::math::{log_add, log_sub, LogAccumulator, NEG_INF};
use crate::quad::{integrate_log, QuadratureSpec};
use crate::rng::{batch_count, batch_range, stream_rng};
use crate::{Error, Executor, LogTailValue, Result, Serial};

/// Largest `k` accepted by [`sum_self_tail`].
pub const MAX_SELF_CONV: usize = 8;
/// Nodes of the gridded intermediate laws used for `k > 2`.
pub const SELF_CONV_NODES: usize = 1024;

/// A tail value with its error budget.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailEstimate {
    pub value: LogTailValue,
    /// `ln` of the estimated absolute quadrature error.
    #[serde(with = "crate::logtail::ext_f64")]
    pub ln_quad_err: f64,
    /// `ln` of the bound on the probability cut from unbounded domains.
    #[serde(with = "crate::logtail::ext_f64")]
    pub ln_truncation: f64,
}

impl TailEstimate {
    fn exact(ln: f64) -> Self {
        TailEstimate {
            value: LogTailValue::from_ln(ln),
            ln_quad_err: NEG_INF,
            ln_truncation: NEG_INF,
        }
    }
}

fn require_nonneg(d: &Distribution, role: &str) -> Result<()> {
    if d.support().0 >= 0.0 {
        Ok(())
    } else {
        Err(Error::Unsupported(format!(
            "{role} must be supported on [0, inf), got {}; apply positive_part first",
            d.label()
        )))
    }
}

fn require_x(x: f64) -> Result<()> {
    if x.is_nan() {
        Err(Error::param("tail", "x", "NaN argument"))
    } else {
        Ok(())
    }
}

/// `ln μ_c((-∞, y])` for the continuous part of `d`.
fn ln_cont_cdf(d: &Distribution, y: f64) -> f64 {
    log_sub(d.ln_sf_cont(f64::NEG_INFINITY), d.ln_sf_cont(y))
}

/// Walks from `start` in direction `dir` (doubling steps, never past
/// `limit`) to the first point where the monotone predicate holds, then
/// bisects the crossing. Returns the point and whether it holds there.
fn search_cut(start: f64, dir: f64, limit: f64, ok: impl Fn(f64) -> bool) -> (f64, bool) {
    if ok(start) {
        return (start, true);
    }
    let past = |u: f64| if dir > 0.0 { u >= limit } else { u <= limit };
    let mut prev = start;
    let mut step = 1.0;
    let hit = loop {
        let mut u = start + dir * step;
        if past(u) {
            u = limit;
            if !ok(u) {
                return (u, false);
            }
            break u;
        }
        if ok(u) {
            break u;
        }
        prev = u;
        step *= 2.0;
    };
    let (mut bad, mut good) = (prev, hit);
    for _ in 0..60 {
        let m = 0.5 * (bad + good);
        if m == bad || m == good {
            break;
        }
        if ok(m) {
            good = m;
        } else {
            bad = m;
        }
    }
    (good, true)
}

/// Argmax of `f` on a scan of `[a, b]` with step at most 0.5.
fn probe_peak(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    if !(b > a) {
        return (f(a), a);
    }
    let n = (((b - a) / 0.5).ceil() as usize).clamp(1, 4000);
    let mut best = (NEG_INF, 0.5 * (a + b));
    for i in 0..=n {
        let u = a + (b - a) * i as f64 / n as f64;
        let v = f(u);
        if v > best.0 {
            best = (v, u);
        }
    }
    best
}

/// Breaks clustering geometrically on the maximiser of `f` near `u0`,
/// so narrow peaks are resolved by panel placement rather than refinement.
fn peak_breaks(f: &impl Fn(f64) -> f64, u0: f64, lo: f64, hi: f64) -> Vec<f64> {
    let (mut a, mut b) = ((u0 - 0.5).max(lo), (u0 + 0.5).min(hi));
    if !(b > a) {
        return vec![u0];
    }
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..80 {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    let mut p = 0.5 * (a + b);
    for e in [lo, hi, u0] {
        if f(e) > f(p) {
            p = e;
        }
    }
    let mut out = vec![p];
    let mut h = 0.5;
    while h > 1e-13 * p.abs().max(1.0) {
        for t in [p - h, p + h] {
            if t > lo && t < hi {
                out.push(t);
            }
        }
        h *= 0.5;
    }
    out
}

fn not_converged(e: Error, known: f64) -> Error {
    match e {
        Error::NotConverged {
            partial_log,
            achieved_rel,
        } => Error::NotConverged {
            partial_log: log_add(known, partial_log),
            achieved_rel,
        },
        other => other,
    }
}

/// `ln P(XY > x)` for independent `X ~ F`, `Y ~ G` on `[0, ∞)`.
pub fn product_tail(f: &Distribution, g: &Distribution, x: f64, q: &QuadratureSpec) -> Result<LogTailValue> {
    product_tail_detail(f, g, x, q).map(|t| t.value)
}

/// [`product_tail`] with its error budget.
pub fn product_tail_detail(f: &Distribution, g: &Distribution, x: f64, q: &QuadratureSpec) -> Result<TailEstimate> {
    q.validate()?;
    require_nonneg(f, "F")?;
    require_nonneg(g, "G")?;
    require_x(x)?;
    if x < 0.0 {
        return Ok(TailEstimate::exact(0.0));
    }
    if x == 0.0 {
        return Ok(TailEstimate::exact(f.ln_sf(0.0) + g.ln_sf(0.0)));
    }
    let (t, m) = if g.as_gridded().is_some() && f.as_gridded().is_none() {
        (g, f)
    } else {
        (f, g)
    };
    let mut acc = LogAccumulator::new();

    // atoms of M against the full tail of T
    let mset = m.atom_set();
    for a in &mset.finite {
        if a.location > 0.0 {
            acc.push(a.mass.ln() + t.ln_sf(x / a.location));
        }
    }
    if let Some(lat) = mset.lattice {
        let lnf = |n: f64| {
            let y = lat.location(n);
            if y > 0.0 {
                lat.ln_mass(n) + t.ln_sf(x / y)
            } else {
                NEG_INF
            }
        };
        let s = if t.has_atoms() {
            let lo_t = t.support().0;
            direct_sum(
                lnf,
                lat.first,
                None,
                |n| {
                    let y = lat.location((n + 1) as f64);
                    (lat.ln_mass_beyond(n), y > 0.0 && x / y < lo_t)
                },
                q,
            )
        } else {
            smooth_sum(lnf, lat.first, None, lat.beta, q)
        };
        acc.push(s.map_err(|e| not_converged(e, acc.value()))?);
    }

    // atoms of T against the continuous part of M
    let m_cont = m.continuous_mass() > 0.0;
    if m_cont {
        let tset = t.atom_set();
        for a in &tset.finite {
            if a.location > 0.0 {
                acc.push(a.mass.ln() + m.ln_sf_cont(x / a.location));
            }
        }
        if let Some(lat) = tset.lattice {
            let lnf = |n: f64| {
                let d = lat.location(n);
                if d > 0.0 {
                    lat.ln_mass(n) + m.ln_sf_cont(x / d)
                } else {
                    NEG_INF
                }
            };
            let s = smooth_sum(lnf, lat.first, None, lat.beta, q);
            acc.push(s.map_err(|e| not_converged(e, acc.value()))?);
        }
    }

    let mut ln_err = NEG_INF;
    let mut ln_trunc = NEG_INF;
    if m_cont && t.continuous_mass() > 0.0 {
        let (lo_m, hi_m) = m.support();
        let hi_t = t.support().1;
        let ylo = if hi_t.is_finite() { lo_m.max(x / hi_t) } else { lo_m };
        let yhi = hi_m;
        if ylo < yhi {
            let cf = |u: f64| t.ln_sf_cont(x * (-u).exp()) + m.ln_pdf(u.exp()) + u;
            let a_lo = if ylo > 0.0 { ylo.ln() } else { NEG_INF };
            let a_hi = if yhi.is_finite() { yhi.ln() } else { f64::INFINITY };
            let lx = x.ln();
            let mut s_lo = if a_lo.is_finite() { a_lo } else { (lx - 150.0).max(-740.0) };
            let mut s_hi = if a_hi.is_finite() { a_hi } else { (lx + 150.0).min(709.0) };
            if s_lo >= s_hi {
                if a_hi.is_finite() {
                    s_lo = (s_hi - 300.0).max(a_lo);
                } else {
                    s_hi = (s_lo + 300.0).min(709.0);
                }
            }
            // independence lower bound max_y F̄(x/y) Ḡ(y) and the integrand peak
            let mut lb = acc.value();
            let n = (((s_hi - s_lo) / 0.5).ceil() as usize).clamp(1, 4000);
            let mut peak = (NEG_INF, 0.5 * (s_lo + s_hi));
            for i in 0..=n {
                let u = s_lo + (s_hi - s_lo) * i as f64 / n as f64;
                let y = u.exp();
                lb = lb.max(t.ln_sf(x / y) + m.ln_sf(y));
                let v = cf(u);
                if v > peak.0 {
                    peak = (v, u);
                }
            }
            let thr = lb + (0.5 * q.truncation_tail).ln();
            let u_lo = if a_lo.is_finite() {
                a_lo
            } else {
                let bound = |u: f64| t.ln_sf_cont(x * (-u).exp()) + ln_cont_cdf(m, u.exp());
                let (u, _) = search_cut(peak.1, -1.0, -745.0, |u| bound(u) <= thr);
                ln_trunc = log_add(ln_trunc, bound(u));
                u
            };
            let u_hi = if a_hi.is_finite() {
                a_hi
            } else {
                let t_mass = t.ln_sf_cont(f64::NEG_INFINITY);
                let bound = |u: f64| t_mass + m.ln_sf_cont(u.exp());
                let (u, _) = search_cut(peak.1, 1.0, 709.0, |u| bound(u) <= thr);
                ln_trunc = log_add(ln_trunc, bound(u));
                u
            };
            if u_lo < u_hi {
                let mut br = vec![u_lo, u_hi];
                br.extend(peak_breaks(&cf, peak.1.clamp(u_lo, u_hi), u_lo, u_hi));
                for b in m.breakpoints(u_lo.exp(), u_hi.exp()) {
                    if b > 0.0 {
                        br.push(b.ln());
                    }
                }
                for b in t.breakpoints(x * (-u_hi).exp(), x * (-u_lo).exp()) {
                    if b > 0.0 {
                        br.push((x / b).ln());
                    }
                }
                br.retain(|u| *u >= u_lo && *u <= u_hi);
                let r = integrate_log(cf, &br, q, lb + (0.5 * q.rel_tol).ln())
                    .map_err(|e| not_converged(e, acc.value()))?;
                acc.push(r.ln_value);
                ln_err = r.ln_err;
            }
        }
    }
    Ok(TailEstimate {
        value: LogTailValue::from_ln(acc.value()),
        ln_quad_err: ln_err,
        ln_truncation: ln_trunc,
    })
}

/// Node layout for gridded product laws.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProductGridSpec {
    pub nodes: usize,
    /// Lower end: the node where `P(XY <= x) = eps_lo`.
    pub eps_lo: f64,
    /// Upper end: the node where `P(XY > x) = eps_hi`.
    pub eps_hi: f64,
    /// Extend the grid up to at least this point.
    #[serde(default)]
    pub x_max: Option<f64>,
}

impl Default for ProductGridSpec {
    fn default() -> Self {
        ProductGridSpec {
            nodes: 512,
            eps_lo: 1e-9,
            eps_hi: 1e-14,
            x_max: None,
        }
    }
}

impl ProductGridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.nodes < 8 {
            return Err(Error::param("product_grid", "nodes", "need at least 8 nodes"));
        }
        if !(self.eps_lo > 0.0 && self.eps_lo < 0.5) {
            return Err(Error::param("product_grid", "eps_lo", "must lie in (0, 0.5)"));
        }
        if !(self.eps_hi > 0.0 && self.eps_hi < 0.5) {
            return Err(Error::param("product_grid", "eps_hi", "must lie in (0, 0.5)"));
        }
        Ok(())
    }
}

/// Law of `XY`.
///
/// Exact when one factor is a point mass (a rescaling) or both are finite
/// atom lists; otherwise a [`GriddedDistribution`] with nodes equally spaced
/// in `τ` between the `eps_lo` and `eps_hi` quantiles, each node computed by
/// [`product_tail`].
pub fn product_dist(
    f: &Distribution,
    g: &Distribution,
    spec: &ProductGridSpec,
    q: &QuadratureSpec,
    exec: &dyn Executor,
) -> Result<Distribution> {
    spec.validate()?;
    q.validate()?;
    require_nonneg(f, "F")?;
    require_nonneg(g, "G")?;
    for (a, b) in [(f, g), (g, f)] {
        if let Some(c) = a.degenerate_at() {
            return if c == 0.0 { Distribution::degenerate(0.0) } else { b.scale(c) };
        }
    }
    if let (Some(fa), Some(ga)) = (f.finite_atoms(), g.finite_atoms()) {
        if fa.len() * ga.len() <= 1 << 20 {
            let mut atoms = Vec::with_capacity(fa.len() * ga.len());
            for a in &fa {
                for b in &ga {
                    atoms.push(crate::dist::Atom {
                        location: a.location * b.location,
                        mass: a.mass * b.mass,
                    });
                }
            }
            let set = AtomSet {
                finite: atoms,
                lattice: None,
            };
            return Distribution::discrete(set.enumerate(0.0, f64::INFINITY));
        }
    }
    let (lo_f, hi_f) = f.support();
    let (lo_g, hi_g) = g.support();
    let lo = lo_f * lo_g;
    let hi = if hi_f.is_finite() && hi_g.is_finite() { hi_f * hi_g } else { f64::INFINITY };
    let tail = |tau: f64| product_tail(f, g, x_at_tau(lo, hi, tau), q).map(|v| v.ln());
    let tau_min = if hi.is_finite() { -700.0 } else { (1e-300f64).ln() };
    let tau_max = if hi.is_finite() { 700.0 } else { (1e300f64 - lo).ln() };

    // lower end: ln H̄ >= ln(1 - eps_lo)
    let lo_level = (-spec.eps_lo).ln_1p();
    let tau_a = bracket(&tail, 0.0, -1.0, tau_min, |l| l >= lo_level)?;
    // upper end: ln H̄ <= ln eps_hi
    let hi_level = spec.eps_hi.ln();
    let mut tau_b = bracket(&tail, 0.0, 1.0, tau_max, |l| l <= hi_level)?;
    if let Some(xm) = spec.x_max {
        if xm > lo && xm < hi {
            tau_b = tau_b.max(tau_at(lo, hi, xm) + 0.05);
        }
    }
    if !(tau_b > tau_a) {
        return Err(Error::GridExhausted(format!(
            "product grid collapsed: tau range [{tau_a}, {tau_b}]"
        )));
    }
    let n = spec.nodes;
    let taus: Vec<f64> = (0..n).map(|i| tau_a + (tau_b - tau_a) * i as f64 / (n - 1) as f64).collect();
    let xs: Vec<f64> = taus.iter().map(|&t| x_at_tau(lo, hi, t)).collect();
    let vals: Vec<f64> = exec
        .map_f64(n, &|i| product_tail(f, g, xs[i], q).map(|v| v.ln()))
        .into_iter()
        .collect::<Result<_>>()?;
    // drop nodes that round onto their neighbours
    let mut kx = Vec::with_capacity(n);
    let mut kv = Vec::with_capacity(n);
    for (x, v) in xs.iter().zip(&vals) {
        if *x > lo && *x < hi && kx.last().is_none_or(|p| x > p) {
            kx.push(*x);
            kv.push(*v);
        }
    }
    let grid = GriddedDistribution::from_nodes(lo, hi, &kx, &kv, q.rel_tol)?;
    if grid.max_repair() > q.rel_tol {
        return Err(Error::GridExhausted(format!(
            "monotone repair {:.3e} exceeds rel_tol {:.1e}; tighten the quadrature or widen the grid",
            grid.max_repair(),
            q.rel_tol
        )));
    }
    // declared tolerance: interpolation error at midpoints between nodes
    let errs = exec.map_f64(kx.len() - 1, &|i| {
        let tm = 0.5 * (tau_at(lo, hi, kx[i]) + tau_at(lo, hi, kx[i + 1]));
        let xm = x_at_tau(lo, hi, tm);
        let exact = product_tail(f, g, xm, q)?.ln();
        Ok((grid.ln_sf(xm) - exact).abs())
    });
    let mut worst = q.rel_tol;
    for e in errs {
        worst = worst.max(e?);
    }
    Ok(Distribution::gridded(grid.with_tolerance(2.0 * worst)))
}

/// Finds the crossing of a monotone level condition on `tail(τ)`, walking
/// from `start` in direction `dir`; stops at `limit`.
fn bracket(tail: &impl Fn(f64) -> Result<f64>, start: f64, dir: f64, limit: f64, reached: impl Fn(f64) -> bool) -> Result<f64> {
    if reached(tail(start)?) {
        // walk back until the condition fails, so the node lands on the level
        let mut step = 1.0;
        let mut inside = start;
        loop {
            let t = start - dir * step;
            if (dir > 0.0 && t <= -limit.abs()) || (dir < 0.0 && t >= limit.abs()) {
                return Ok(inside);
            }
            if !reached(tail(t)?) {
                return bisect_level(tail, t, inside, &reached);
            }
            inside = t;
            step *= 2.0;
        }
    }
    let mut prev = start;
    let mut step = 1.0;
    loop {
        let mut t = start + dir * step;
        let past = if dir > 0.0 { t >= limit } else { t <= limit };
        if past {
            t = limit;
        }
        if reached(tail(t)?) {
            return bisect_level(tail, prev, t, &reached);
        }
        if past {
            return Ok(limit);
        }
        prev = t;
        step *= 2.0;
    }
}

fn bisect_level(tail: &impl Fn(f64) -> Result<f64>, mut out: f64, mut inside: f64, reached: &impl Fn(f64) -> bool) -> Result<f64> {
    for _ in 0..40 {
        let m = 0.5 * (out + inside);
        if reached(tail(m)?) {
            inside = m;
        } else {
            out = m;
        }
    }
    Ok(inside)
}

#[derive(Clone, Copy)]
enum Inner<'a> {
    Same(&'a Distribution),
    Grid(&'a GriddedDistribution),
}

impl Inner<'_> {
    fn ln_sf(&self, t: f64) -> f64 {
        match self {
            Inner::Same(d) => d.ln_sf(t),
            Inner::Grid(g) => g.ln_sf(t),
        }
    }

    /// Points where the inner tail jumps or kinks, inside `[lo, hi]`.
    fn kinks(&self, lo: f64, hi: f64) -> Vec<f64> {
        match self {
            Inner::Same(d) => {
                let mut k = d.breakpoints(lo, hi);
                let set = d.atom_set();
                let few = set
                    .lattice
                    .as_ref()
                    .is_none_or(|l| l.last_index_at_or_below(hi).is_none_or(|n| n - l.first < 2000));
                if few {
                    k.extend(set.enumerate(0.0, hi).into_iter().map(|a| a.location).filter(|&a| a >= lo));
                }
                k
            }
            Inner::Grid(_) => Vec::new(),
        }
    }
}

/// `ln P(X + S > x)` for `X ~ v` independent of `S` with tail `inner`:
/// `V̄(x) + Σ_{atoms a <= x} m_a S̄(x - a) + ∫_{(0,x]} S̄(x - y) v_c(y) dy`.
/// The integral is split at `x/2`; the upper half runs in `ln(x - y)`.
fn conv_step(v: &Distribution, inner: Inner<'_>, x: f64, q: &QuadratureSpec) -> Result<f64> {
    let mut acc = LogAccumulator::new();
    acc.push(v.ln_sf(x));
    let vset = v.atom_set();
    for a in &vset.finite {
        if a.location <= x {
            acc.push(a.mass.ln() + inner.ln_sf(x - a.location));
        }
    }
    if let Some(lat) = vset.lattice {
        if let Some(last) = lat.last_index_at_or_below(x) {
            let lnf = |n: f64| lat.ln_mass(n) + inner.ln_sf(x - lat.location(n));
            let s = match (inner, v.pure_lattice()) {
                (Inner::Same(_), Some((_, l))) => {
                    // V̄(x - s n) = C ζ(β, last - n + 1) extends smoothly in n
                    let top = last as f64;
                    smooth_sum(|t| l.ln_mass(t) + l.ln_sf_from(top - t + 1.0), lat.first, Some(last), l.beta, q)
                }
                (Inner::Same(_), None) => {
                    direct_sum(lnf, lat.first, Some(last), |n| (lat.ln_mass_beyond(n), false), q)
                }
                (Inner::Grid(_), _) => smooth_sum(lnf, lat.first, Some(last), lat.beta, q),
            };
            acc.push(s.map_err(|e| not_converged(e, acc.value()))?);
        }
    }
    if v.continuous_mass() == 0.0 {
        return Ok(acc.value());
    }
    let (lo, hi) = v.support();
    let top = hi.min(x);
    if !(lo < top) {
        return Ok(acc.value());
    }
    let lb = acc.value();
    let thr = lb + (0.25 * q.truncation_tail).ln();
    let floor = lb + (0.25 * q.rel_tol).ln();
    let mid = 0.5 * x;
    let mut total = LogAccumulator::new();
    total.push(lb);

    // y in (lo, min(x/2, top)], u = ln y
    let r1_hi = mid.min(top);
    if lo < r1_hi {
        let f1 = |u: f64| {
            let y = u.exp();
            inner.ln_sf(x - y) + v.ln_pdf(y) + u
        };
        let u_hi = r1_hi.ln();
        let u_lo = if lo > 0.0 {
            lo.ln()
        } else {
            search_cut(u_hi, -1.0, -745.0, |u| ln_cont_cdf(v, u.exp()) <= thr).0
        };
        if u_lo < u_hi {
            let mut br = vec![u_lo, u_hi];
            br.extend(peak_breaks(&f1, probe_peak(&f1, u_lo.max(u_hi - 300.0), u_hi).1, u_lo, u_hi));
            br.extend(v.breakpoints(u_lo.exp(), r1_hi).into_iter().filter(|&b| b > 0.0).map(f64::ln));
            br.extend(
                inner
                    .kinks(x - r1_hi, x - u_lo.exp())
                    .into_iter()
                    .map(|k| x - k)
                    .filter(|&y| y > 0.0)
                    .map(f64::ln),
            );
            br.retain(|u| *u >= u_lo && *u <= u_hi);
            let r = integrate_log(f1, &br, q, floor).map_err(|e| not_converged(e, total.value()))?;
            total.push(r.ln_value);
        }
    }

    // y in [max(x/2, lo), top), s = ln(x - y)
    let r2_lo = mid.max(lo);
    if r2_lo < top {
        let f2 = |s: f64| {
            let w = s.exp();
            inner.ln_sf(w) + v.ln_pdf(x - w) + s
        };
        let s_hi = (x - r2_lo).ln();
        let s_lo = if top < x {
            (x - top).ln()
        } else {
            let tail_x = v.ln_sf_cont(x);
            search_cut(s_hi, -1.0, -745.0, |s| log_sub(v.ln_sf_cont(x - s.exp()), tail_x) <= thr).0
        };
        if s_lo < s_hi {
            let mut br = vec![s_lo, s_hi];
            br.extend(peak_breaks(&f2, probe_peak(&f2, s_lo.max(s_hi - 300.0), s_hi).1, s_lo, s_hi));
            br.extend(
                v.breakpoints(x - s_hi.exp(), x - s_lo.exp())
                    .into_iter()
                    .map(|b| x - b)
                    .filter(|&w| w > 0.0)
                    .map(f64::ln),
            );
            br.extend(inner.kinks(s_lo.exp(), s_hi.exp()).into_iter().filter(|&w| w > 0.0).map(f64::ln));
            br.retain(|s| *s >= s_lo && *s <= s_hi);
            let r = integrate_log(f2, &br, q, floor).map_err(|e| not_converged(e, total.value()))?;
            total.push(r.ln_value);
        }
    }
    Ok(total.value())
}

/// `ln P(X_1 + ... + X_k > x)` for i.i.d. `X_i ~ v` on `[0, ∞)`.
pub fn sum_self_tail(v: &Distribution, k: usize, x: f64, q: &QuadratureSpec) -> Result<LogTailValue> {
    sum_self_tail_with(v, k, x, q, &Serial)
}

/// [`sum_self_tail`] with grid nodes of the intermediate laws (`k > 2`)
/// distributed by `exec`.
pub fn sum_self_tail_with(v: &Distribution, k: usize, x: f64, q: &QuadratureSpec, exec: &dyn Executor) -> Result<LogTailValue> {
    q.validate()?;
    require_nonneg(v, "V")?;
    require_x(x)?;
    if k == 0 || k > MAX_SELF_CONV {
        return Err(Error::param("sum_self_tail", "k", format!("must lie in 1..={MAX_SELF_CONV}, got {k}")));
    }
    if k == 1 {
        return Ok(v.log_sf(x));
    }
    let lo = v.support().0;
    if x < k as f64 * lo || x < 0.0 {
        return Ok(LogTailValue::ONE);
    }
    if x == 0.0 {
        // 1 - P(V = 0)^k
        let ln_p0 = log_sub(0.0, v.ln_sf(0.0));
        return Ok(LogTailValue::from_ln(crate::math::log1mexp(k as f64 * ln_p0)));
    }
    if k == 2 {
        return conv_step(v, Inner::Same(v), x, q).map(LogTailValue::from_ln);
    }
    let mut grid: Option<GriddedDistribution> = None;
    for j in 2..k {
        let lo_j = j as f64 * lo;
        let span = x - lo_j;
        let n = SELF_CONV_NODES;
        let ts: Vec<f64> = (0..n)
            .map(|i| lo_j + span * (-(1e12f64).ln() * (1.0 - i as f64 / (n - 1) as f64)).exp())
            .collect();
        let prev = grid.as_ref();
        let vals: Vec<f64> = exec
            .map_f64(n, &|i| {
                let inner = match prev {
                    None => Inner::Same(v),
                    Some(g) => Inner::Grid(g),
                };
                conv_step(v, inner, ts[i], q)
            })
            .into_iter()
            .collect::<Result<_>>()?;
        let mut kx = Vec::with_capacity(n);
        let mut kv = Vec::with_capacity(n);
        for (t, l) in ts.iter().zip(&vals) {
            if *t > lo_j && kx.last().is_none_or(|p| t > p) {
                kx.push(*t);
                kv.push(*l);
            }
        }
        grid = Some(GriddedDistribution::from_nodes(lo_j, f64::INFINITY, &kx, &kv, q.rel_tol)?);
    }
    let g = grid.expect("k > 2 builds at least one grid");
    conv_step(v, Inner::Grid(&g), x, q).map(LogTailValue::from_ln)
}

/// Plain Monte Carlo estimate of a probability.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub estimate: f64,
    /// Half-width of the normal 95% interval; with zero hits, the one-sided
    /// 95% upper bound `1 - 0.05^{1/n}`.
    pub ci_halfwidth: f64,
    pub hits: u64,
    pub draws: u64,
    pub seed: u64,
    /// Set only when there were no hits.
    pub upper_bound: Option<f64>,
}

impl McEstimate {
    pub(crate) fn from_hits(hits: u64, draws: u64, seed: u64) -> Self {
        let n = draws as f64;
        if hits == 0 {
            let ub = -(0.05f64.ln() / n).exp_m1();
            return McEstimate {
                estimate: 0.0,
                ci_halfwidth: ub,
                hits,
                draws,
                seed,
                upper_bound: Some(ub),
            };
        }
        let p = hits as f64 / n;
        McEstimate {
            estimate: p,
            ci_halfwidth: 1.96 * (p * (1.0 - p) / n).sqrt(),
            hits,
            draws,
            seed,
            upper_bound: None,
        }
    }

    /// Standard error of the estimate.
    pub fn sigma(&self) -> f64 {
        self.ci_halfwidth / 1.96
    }
}

/// Monte Carlo estimate of `P(XY > x)` from `n` paired draws. Batch `b`
/// draws from stream `b` of `seed`, so the result does not depend on `exec`.
pub fn mc_product_tail(
    f: &Distribution,
    g: &Distribution,
    x: f64,
    n: u64,
    seed: u64,
    exec: &dyn Executor,
) -> Result<McEstimate> {
    if n < 10_000 {
        return Err(Error::param("mc_product_tail", "n", "need at least 1e4 draws"));
    }
    require_x(x)?;
    let nb = batch_count(n);
    let counts = exec.map_counts(nb as usize, &|b| {
        let (s, e) = batch_range(b as u64, n);
        let mut rng = stream_rng(seed, b as u64);
        let mut hits = 0u64;
        for _ in s..e {
            let a = f.sample_one(&mut rng);
            let c = g.sample_one(&mut rng);
            if a * c > x {
                hits += 1;
            }
        }
        vec![hits]
    });
    let hits = counts.iter().map(|c| c[0]).sum();
    Ok(McEstimate::from_hits(hits, n, seed))
}
