//! Discrete-time insurance model with stochastic discount factors.
//!
//! Net losses `Z_i` are i.i.d., discount factors `Y_j` are i.i.d. and
//! independent of them, and the discounted aggregate loss is
//! `S_n = Σ_{i<=n} Z_i ∏_{j<=i} Y_j`. With `F` the law of `Z⁺` and `W_i` the
//! law of `∏_{j<=i} Y_j`, the discounted tails are `H̄_i(x) = P(Z⁺ W_i > x)`.
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::convolve::{product_dist, product_tail, McEstimate, ProductGridSpec};
use crate::diagnostics::{
    check_condition, classify, theorem11_verdict, ClassId, ClassReport, ConditionId, ConditionParams, ConditionReport,
    DiagConfig, Membership, Theorem11Verdict,
};
use crate::dist::{make_family, Distribution, FamilySpec};
use crate::logtail::ext_f64;
use crate::math::{log_sum_exp, LogAccumulator};
use crate::quad::QuadratureSpec;
use crate::rng::{batch_count, batch_range, stream_rng};
use crate::{Error, Executor, LogTailValue, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Horizon {
    Finite { n: usize },
    Infinite,
}

/// Serializable model description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RiskModelSpec {
    pub z_law: FamilySpec,
    pub y_law: FamilySpec,
    pub horizon: Horizon,
}

/// A validated model: `Y > 0` almost surely, `F` the law of `Z⁺`.
#[derive(Clone, Debug)]
pub struct RiskModel {
    pub z: Distribution,
    pub y: Distribution,
    pub f: Distribution,
    pub horizon: Horizon,
}

impl RiskModel {
    pub fn new(z: Distribution, y: Distribution, horizon: Horizon) -> Result<Self> {
        if y.support().0 < 0.0 || y.ln_sf(0.0) != 0.0 {
            return Err(Error::param("risk_model", "y_law", format!("{} must satisfy P(Y > 0) = 1", y.label())));
        }
        if let Horizon::Finite { n } = horizon {
            if n == 0 {
                return Err(Error::param("risk_model", "horizon", "n must be >= 1"));
            }
        }
        let f = z.positive_part();
        Ok(RiskModel { z, y, f, horizon })
    }

    pub fn from_spec(spec: &RiskModelSpec) -> Result<Self> {
        RiskModel::new(make_family(&spec.z_law)?, make_family(&spec.y_law)?, spec.horizon)
    }
}

/// Laws `W_1, ..., W_n` of the partial products `∏_{j<=i} Y_j`, each
/// built from the previous one by [`product_dist`]; `W_1 = Y`.
#[derive(Clone, Debug)]
pub struct DiscountLaws {
    laws: Vec<Distribution>,
}

impl DiscountLaws {
    pub fn build(y: &Distribution, n: usize, spec: &ProductGridSpec, q: &QuadratureSpec, exec: &dyn Executor) -> Result<Self> {
        let mut laws = vec![y.clone()];
        while laws.len() < n {
            let next = product_dist(laws.last().expect("nonempty"), y, spec, q, exec).map_err(|e| match e {
                Error::GridExhausted(m) => Error::GridExhausted(format!(
                    "{m} (building the law of a product of {} discount factors; widen the product grid)",
                    laws.len() + 1
                )),
                other => other,
            })?;
            laws.push(next);
        }
        Ok(DiscountLaws { laws })
    }

    /// `W_i`, `1 <= i <= len`.
    pub fn get(&self, i: usize) -> &Distribution {
        &self.laws[i - 1]
    }

    pub fn len(&self) -> usize {
        self.laws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.laws.is_empty()
    }
}

/// `ln H̄_i(x)`.
pub fn discounted_loss_tail(
    model: &RiskModel,
    i: usize,
    x: f64,
    spec: &ProductGridSpec,
    q: &QuadratureSpec,
    exec: &dyn Executor,
) -> Result<LogTailValue> {
    if i == 0 {
        return Err(Error::param("discounted_loss_tail", "i", "must be >= 1"));
    }
    let w = DiscountLaws::build(&model.y, i, spec, q, exec)?;
    product_tail(&model.f, w.get(i), x, q)
}

/// `ln H̄_i(x)` for `i = 1..=laws.len()`.
pub fn discounted_loss_tails(model: &RiskModel, laws: &DiscountLaws, x: f64, q: &QuadratureSpec) -> Result<Vec<LogTailValue>> {
    (1..=laws.len()).map(|i| product_tail(&model.f, laws.get(i), x, q)).collect()
}

/// Monte Carlo ruin probability with its terminal-value companion.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RuinEstimate {
    /// `P(max_{k<=n} S_k > x)`.
    pub point: f64,
    pub ci_halfwidth: f64,
    /// `P(S_n > x)` from the same paths.
    pub terminal_point: f64,
    pub terminal_ci_halfwidth: f64,
    pub paths: u64,
    pub seed: u64,
    pub n: usize,
    #[serde(with = "ext_f64")]
    pub x: f64,
}

impl RuinEstimate {
    fn new(hits: u64, terminal: u64, paths: u64, seed: u64, n: usize, x: f64) -> Self {
        let a = McEstimate::from_hits(hits, paths, seed);
        let b = McEstimate::from_hits(terminal, paths, seed);
        RuinEstimate {
            point: a.estimate,
            ci_halfwidth: a.ci_halfwidth,
            terminal_point: b.estimate,
            terminal_ci_halfwidth: b.ci_halfwidth,
            paths,
            seed,
            n,
            x,
        }
    }
}

/// Ruin estimates for every horizon `1..=n_max` and every `x` in `xs`,
/// all read off the same paths, so they are monotone pathwise.
///
/// Path batches use stream `b` of `seed`; within a path each step draws
/// `Z` then `Y`. Result `[k][j]` is horizon `k + 1` at `xs[j]`.
pub fn finite_ruin_mc_grid(
    model: &RiskModel,
    n_max: usize,
    xs: &[f64],
    paths: u64,
    seed: u64,
    exec: &dyn Executor,
) -> Result<Vec<Vec<RuinEstimate>>> {
    if n_max == 0 {
        return Err(Error::param("finite_ruin_mc", "n", "must be >= 1"));
    }
    if paths < 10_000 {
        return Err(Error::param("finite_ruin_mc", "paths", "need at least 1e4 paths"));
    }
    if xs.is_empty() || xs.iter().any(|x| x.is_nan()) {
        return Err(Error::param("finite_ruin_mc", "x", "need at least one non-NaN level"));
    }
    let m = xs.len();
    let cells = n_max * m;
    let counts = exec.map_counts(batch_count(paths) as usize, &|b| {
        let (s, e) = batch_range(b as u64, paths);
        let mut rng = stream_rng(seed, b as u64);
        // [max hits | terminal hits] per (horizon, level)
        let mut c = vec![0u64; 2 * cells];
        for _ in s..e {
            let mut sum = 0.0;
            let mut disc = 1.0;
            let mut run_max = f64::NEG_INFINITY;
            for k in 0..n_max {
                let z = model.z.sample_one(&mut rng);
                let y = model.y.sample_one(&mut rng);
                disc *= y;
                sum += z * disc;
                run_max = run_max.max(sum);
                for (j, &x) in xs.iter().enumerate() {
                    if run_max > x {
                        c[k * m + j] += 1;
                    }
                    if sum > x {
                        c[cells + k * m + j] += 1;
                    }
                }
            }
        }
        c
    });
    let mut tot = vec![0u64; 2 * cells];
    for c in &counts {
        for (t, v) in tot.iter_mut().zip(c) {
            *t += v;
        }
    }
    Ok((0..n_max)
        .map(|k| {
            (0..m)
                .map(|j| RuinEstimate::new(tot[k * m + j], tot[cells + k * m + j], paths, seed, k + 1, xs[j]))
                .collect()
        })
        .collect())
}

/// Monte Carlo estimate of `P(max_{k<=n} S_k > x)`.
pub fn finite_ruin_mc(model: &RiskModel, n: usize, x: f64, paths: u64, seed: u64, exec: &dyn Executor) -> Result<RuinEstimate> {
    let mut g = finite_ruin_mc_grid(model, n, &[x], paths, seed, exec)?;
    Ok(g.pop().expect("n >= 1").pop().expect("one level"))
}

/// `ln Σ_{i<=n} H̄_i(x)`.
pub fn finite_ruin_asymptotic(
    model: &RiskModel,
    n: usize,
    x: f64,
    spec: &ProductGridSpec,
    q: &QuadratureSpec,
    exec: &dyn Executor,
) -> Result<LogTailValue> {
    if n == 0 {
        return Err(Error::param("finite_ruin_asymptotic", "n", "must be >= 1"));
    }
    let laws = DiscountLaws::build(&model.y, n, spec, q, exec)?;
    let terms = discounted_loss_tails(model, &laws, x, q)?;
    Ok(LogTailValue::from_ln(log_sum_exp(terms.iter().map(|t| t.ln()))))
}

/// The sum of discounted tails together with the evidence behind using it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticReport {
    pub n: usize,
    #[serde(with = "ext_f64")]
    pub x: f64,
    pub value: LogTailValue,
    pub terms: Vec<LogTailValue>,
    /// Scaled domination of `Y` by the product, per `b`.
    pub domination: Option<ConditionReport>,
    /// Closure verdict for the product of `F` and `Y`.
    pub closure: Option<Theorem11Verdict>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

/// [`finite_ruin_asymptotic`] with the supporting condition reports. The
/// checks are advisory: failures are recorded, not raised.
pub fn finite_ruin_asymptotic_report(model: &RiskModel, n: usize, x: f64, cfg: &DiagConfig, exec: &dyn Executor) -> Result<AsymptoticReport> {
    if n == 0 {
        return Err(Error::param("finite_ruin_asymptotic", "n", "must be >= 1"));
    }
    let laws = DiscountLaws::build(&model.y, n, &cfg.product, &cfg.quad, exec)?;
    let terms = discounted_loss_tails(model, &laws, x, &cfg.quad)?;
    let value = LogTailValue::from_ln(log_sum_exp(terms.iter().map(|t| t.ln())));
    let mut notes = Vec::new();
    let domination = match check_condition(ConditionId::Eq11, &model.f, &model.y, &ConditionParams::default(), cfg, exec) {
        Ok(r) => Some(r),
        Err(e) => {
            notes.push(format!("domination check not available: {e}"));
            None
        }
    };
    let closure = match theorem11_verdict(&model.f, &model.y, cfg, exec) {
        Ok(v) => Some(v),
        Err(e) => {
            notes.push(format!("closure verdict not available: {e}"));
            None
        }
    };
    Ok(AsymptoticReport {
        n,
        x,
        value,
        terms,
        domination,
        closure,
        notes,
    })
}

/// Outcome of the infinite-horizon divergence check.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GuardResult {
    pub pass: bool,
    pub reason: String,
}

/// Refuses the infinite-horizon series when `Y >= s₁ >= 1` almost surely:
/// then `Σ_{i<=n} H̄_i(x) >= Σ_{i<=n} F̄(x/s₁^i) >= n F̄(x) → ∞`.
pub fn divergence_guard(model: &RiskModel) -> GuardResult {
    let s1 = model.y.support().0;
    if s1 >= 1.0 {
        GuardResult {
            pass: false,
            reason: format!(
                "Y = {} has lower support bound {s1} >= 1, so sum_i H_i(x) >= sum_i F(x/{s1}^i) >= n F(x) -> infinity; \
                 the infinite-horizon series diverges",
                model.y.label()
            ),
        }
    } else {
        GuardResult {
            pass: true,
            reason: format!("Y = {} has lower support bound {s1} < 1", model.y.label()),
        }
    }
}

/// Knobs for [`infinite_lower_bound`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LowerBoundOptions {
    pub lambda: f64,
    pub epsilon: f64,
    /// Largest fraction of the partial series the remainder bound may be.
    pub remainder_fraction: f64,
    pub max_terms: usize,
    /// Per-term ratio checks run for `i <= check_terms`.
    pub check_terms: usize,
    /// First grid node (0-based) of the per-term checks.
    pub x0_index: usize,
}

impl Default for LowerBoundOptions {
    fn default() -> Self {
        LowerBoundOptions {
            lambda: 2.0,
            epsilon: 0.05,
            remainder_fraction: 0.01,
            max_terms: 200,
            check_terms: 10,
            x0_index: 9,
        }
    }
}

/// One per-term inequality `H̄_{i+1}(x) <= r H̄_i(x)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TermCheck {
    pub i: usize,
    #[serde(with = "ext_f64")]
    pub x: f64,
    #[serde(with = "ext_f64")]
    pub ln_ratio: f64,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundReport {
    #[serde(with = "ext_f64")]
    pub x: f64,
    /// `Σ_{i<=i*} H̄_i(x)`.
    pub series: LogTailValue,
    /// `ln` of the geometric bound on `Σ_{i>i*} H̄_i(x)`.
    #[serde(with = "ext_f64")]
    pub ln_remainder: f64,
    /// Remainder bound over the partial series.
    pub remainder_fraction: f64,
    pub i_star: usize,
    pub terms: Vec<LogTailValue>,
    pub lambda: f64,
    pub epsilon: f64,
    /// Estimated `limsup F̄(λx)/F̄(x)`.
    pub a: f64,
    /// `P(Y <= 1/λ)`.
    pub p: f64,
    pub q: f64,
    /// Contraction factor `pa + pε + q`.
    pub factor: f64,
    pub checks: Vec<TermCheck>,
    pub premise: ClassReport,
}

/// Lower-bound series `Σ_i H̄_i(x)` for `F ∈ A` and `Y` on `(0, 1]`.
///
/// The terms contract like `H̄_{i+1}(x) <= r H̄_i(x)` with
/// `r = pa + pε + q`, so the partial sum to `i*` leaves a remainder of at
/// most `r^{i*}/(1 - r) H̄_1(x)`; `i*` is the first index where that falls
/// below `remainder_fraction` of the partial sum.
pub fn infinite_lower_bound(
    model: &RiskModel,
    x: f64,
    opts: &LowerBoundOptions,
    cfg: &DiagConfig,
    exec: &dyn Executor,
) -> Result<LowerBoundReport> {
    let guard = divergence_guard(model);
    if !guard.pass {
        return Err(Error::Divergent(guard.reason));
    }
    if !(opts.lambda > 1.0) {
        return Err(Error::param("infinite_lower_bound", "lambda", "must be > 1"));
    }
    if !(opts.remainder_fraction > 0.0 && opts.remainder_fraction < 1.0) {
        return Err(Error::param("infinite_lower_bound", "remainder_fraction", "must lie in (0, 1)"));
    }
    if !(x > 0.0 && x.is_finite()) {
        return Err(Error::param("infinite_lower_bound", "x", "must be finite and > 0"));
    }
    if model.y.support().1 > 1.0 {
        return Err(Error::Unsupported(format!("Y = {} must be supported on (0, 1]", model.y.label())));
    }
    let premise = classify(&model.f, ClassId::A, cfg, exec)?;
    if premise.membership != Membership::Member {
        return Err(Error::PremiseFailed(format!(
            "F = {} is not in class A on the grid: membership {:?}",
            model.f.label(),
            premise.membership
        )));
    }
    let a = premise
        .estimate("limsup")
        .ok_or_else(|| Error::PremiseFailed("no limsup estimate".into()))?;
    // the class check used t = a_factor; the bound needs t = λ
    let a = if (cfg.class.a_factor - opts.lambda).abs() > 0.0 {
        let xs = cfg.grid.points();
        let d = crate::diagnostics::ratio_curve(
            &|t| Ok(model.f.ln_sf(opts.lambda * t)),
            &|t| Ok(model.f.ln_sf(t)),
            &xs,
            &cfg.thresholds,
            exec,
        )?;
        d.window.ln_max.exp()
    } else {
        a
    };
    if !(opts.epsilon > 0.0 && opts.epsilon < 1.0 - a) {
        return Err(Error::param(
            "infinite_lower_bound",
            "epsilon",
            format!("must lie in (0, 1 - a) = (0, {})", 1.0 - a),
        ));
    }
    let p = -model.y.ln_sf(1.0 / opts.lambda).exp_m1();
    let q = 1.0 - p;
    let factor = p * a + p * opts.epsilon + q;
    if factor >= 1.0 {
        return Err(Error::VacuousBound { factor });
    }
    let mut laws = DiscountLaws::build(&model.y, 1, &cfg.product, &cfg.quad, exec)?;
    let mut terms = vec![product_tail(&model.f, laws.get(1), x, &cfg.quad)?];
    let ln_h1 = terms[0].ln();
    let ln_tail = |m: usize| m as f64 * factor.ln() - (1.0 - factor).ln() + ln_h1;
    let mut acc = LogAccumulator::new();
    acc.push(ln_h1);
    let target = opts.remainder_fraction.ln();
    while ln_tail(terms.len()) - acc.value() >= target {
        if terms.len() >= opts.max_terms {
            return Err(Error::GridExhausted(format!(
                "remainder bound still above {} of the series after {} terms",
                opts.remainder_fraction,
                terms.len()
            )));
        }
        let next = product_dist(laws.get(laws.len()), &model.y, &cfg.product, &cfg.quad, exec)?;
        laws.laws.push(next);
        let t = product_tail(&model.f, laws.get(laws.len()), x, &cfg.quad)?;
        acc.push(t.ln());
        terms.push(t);
    }
    let i_star = terms.len();
    let ln_rem = ln_tail(i_star);
    // per-term contraction evidence
    let need = opts.check_terms + 1;
    while laws.len() < need {
        let next = product_dist(laws.get(laws.len()), &model.y, &cfg.product, &cfg.quad, exec)?;
        laws.laws.push(next);
    }
    let xs: Vec<f64> = cfg.grid.points().into_iter().skip(opts.x0_index).collect();
    let mut checks = Vec::new();
    for &xc in &xs {
        let mut prev = product_tail(&model.f, laws.get(1), xc, &cfg.quad)?.ln();
        for i in 1..=opts.check_terms {
            let cur = product_tail(&model.f, laws.get(i + 1), xc, &cfg.quad)?.ln();
            let ln_ratio = cur - prev;
            checks.push(TermCheck {
                i,
                x: xc,
                ln_ratio,
                holds: ln_ratio <= factor.ln(),
            });
            prev = cur;
        }
    }
    Ok(LowerBoundReport {
        x,
        series: LogTailValue::from_ln(acc.value()),
        ln_remainder: ln_rem,
        remainder_fraction: (ln_rem - acc.value()).exp(),
        i_star,
        terms,
        lambda: opts.lambda,
        epsilon: opts.epsilon,
        a,
        p,
        q,
        factor,
        checks,
        premise,
    })
}

#[cfg(test)]
mod tests;
