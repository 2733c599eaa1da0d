use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use super::{ratio_curve, DiagConfig, InsensitivityFunction, RatioDiagnostic, Thresholds, Verdict};
use crate::convolve::product_tail;
use crate::dist::Distribution;
use crate::grid::EvalGrid;
use crate::logtail::ext_f64;
use crate::math::log1mexp;
use crate::{Error, Executor, Result};

/// Named closure conditions on the product `H` of `F` and `G`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConditionId {
    /// `Ḡ(x) = o(H̄(bx))` for every `b > 0`.
    #[serde(rename = "EQ11")]
    Eq11,
    /// `Ḡ(x/d) - Ḡ((x+1)/d) = o(H̄(x))` for all `d ∈ D[F]`.
    #[serde(rename = "EQ12")]
    Eq12,
    /// `H̄(x) = O(F̄(x/t))` for some `t >= 1`.
    #[serde(rename = "EQ13")]
    Eq13,
    /// `H̄(x) = O(F̄(x/d))` for some `d ∈ D[G]`.
    #[serde(rename = "EQ14")]
    Eq14,
    /// `Ḡ(a(x)) = o(H̄(x))`, with `F̄(x - a(x)) ∼ F̄(x)` alongside.
    #[serde(rename = "T1A_D")]
    T1aD,
    /// `Ḡ(a(x)) = O(H̄(x))` and `F̄(x/a(x)) = O(H̄(x))`.
    #[serde(rename = "T31")]
    T31,
    /// `F̄(x - 1/x) ∼ F̄(x)`, `Ḡ(x - 1/x) ∼ Ḡ(x)`, `Ḡ(a(x)) = O(H̄(x))`
    /// and `F̄(a(x)) = O(H̄(x))`.
    #[serde(rename = "T32")]
    T32,
}

impl core::str::FromStr for ConditionId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "EQ11" => Ok(ConditionId::Eq11),
            "EQ12" => Ok(ConditionId::Eq12),
            "EQ13" => Ok(ConditionId::Eq13),
            "EQ14" => Ok(ConditionId::Eq14),
            "T1A_D" => Ok(ConditionId::T1aD),
            "T31" => Ok(ConditionId::T31),
            "T32" => Ok(ConditionId::T32),
            _ => Err(Error::param("check", "cond", format!("unknown condition `{s}`"))),
        }
    }
}

/// What a per-parameter ratio must do.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Requirement {
    LittleO,
    BigO,
    Equivalent,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Overall {
    HoldsEvidence,
    FailsEvidence,
    Inconclusive,
}

/// How per-parameter outcomes combine.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantifier {
    /// Every row must hold.
    All,
    /// One holding row suffices.
    Some,
}

/// The function `a` in the insensitivity-type conditions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AFunction {
    /// `a(x) = coef * x^exponent`.
    Power { coef: f64, exponent: f64 },
    Table(InsensitivityFunction),
}

impl AFunction {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            AFunction::Power { coef, exponent } => coef * x.powf(*exponent),
            AFunction::Table(t) => t.eval(x),
        }
    }

    fn label(&self) -> String {
        match self {
            AFunction::Power { coef, exponent } => format!("a(x)={coef}*x^{exponent}"),
            AFunction::Table(t) => format!("a(x)=insensitivity(delta={})", t.delta),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            AFunction::Power { coef, exponent } => {
                if !(*coef > 0.0) {
                    return Err(Error::param("a_function", "coef", "must be > 0"));
                }
                if !(*exponent > 0.0 && *exponent < 1.0) {
                    return Err(Error::param(
                        "a_function",
                        "exponent",
                        "must lie in (0, 1) so that a(x) and x/a(x) both increase to infinity",
                    ));
                }
                Ok(())
            }
            AFunction::Table(t) => t.validate(),
        }
    }
}

/// Probe sets for the quantified parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConditionParams {
    pub b_values: Vec<f64>,
    pub t_values: Vec<f64>,
    /// Added to the atom probe set of `D[F]` (or `D[G]`).
    pub extra_d: Vec<f64>,
    pub a: Option<AFunction>,
    /// Evaluation grid; by default the knot grid for laws that carry one,
    /// otherwise the configured geometric grid.
    pub grid: Option<EvalGrid>,
}

impl Default for ConditionParams {
    fn default() -> Self {
        ConditionParams {
            b_values: vec![0.25, 0.5, 1.0, 2.0, 4.0],
            t_values: vec![1.0, 2.0, 4.0],
            extra_d: Vec::new(),
            a: None,
            grid: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParameterEvidence {
    pub label: String,
    /// The quantified value (`b`, `d`, `t`); NaN for function rows.
    #[serde(with = "ext_f64")]
    pub parameter: f64,
    pub requirement: Requirement,
    pub outcome: Overall,
    pub diagnostic: RatioDiagnostic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub condition: ConditionId,
    pub quantifier: Quantifier,
    pub parameter_evidence: Vec<ParameterEvidence>,
    pub overall: Overall,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

/// Grades one ratio curve against its requirement. The HOLDS and FAILS
/// regions are disjoint by construction, so moving the window can only
/// pass between them through INCONCLUSIVE.
pub(crate) fn grade(req: Requirement, d: &RatioDiagnostic, th: &Thresholds) -> Overall {
    let w = &d.window;
    if d.verdict == Verdict::Inconclusive && w.points == 0 {
        return Overall::Inconclusive;
    }
    match req {
        Requirement::LittleO => {
            if d.verdict == Verdict::Vanishes {
                Overall::HoldsEvidence
            } else if w.ln_min >= th.fail_floor.ln() {
                Overall::FailsEvidence
            } else {
                Overall::Inconclusive
            }
        }
        Requirement::BigO => {
            let cap = th.bounded_factor.ln() + w.ln_curve_median;
            let within = w.ln_max <= cap || w.ln_max == f64::NEG_INFINITY;
            match d.verdict {
                Verdict::Bounded(_) | Verdict::ConvergesTo(_) | Verdict::Vanishes if within => Overall::HoldsEvidence,
                Verdict::Diverges if !within => Overall::FailsEvidence,
                _ => Overall::Inconclusive,
            }
        }
        Requirement::Equivalent => {
            let far = (3.0 * th.tol_c).ln_1p();
            match d.verdict {
                Verdict::ConvergesTo(c) if (c - 1.0).abs() <= th.tol_c => Overall::HoldsEvidence,
                _ if d.trailing(th.window).iter().all(|r| r.abs() >= far) => Overall::FailsEvidence,
                _ => Overall::Inconclusive,
            }
        }
    }
}

fn aggregate(q: Quantifier, rows: &[ParameterEvidence]) -> Overall {
    let holds = |r: &ParameterEvidence| r.outcome == Overall::HoldsEvidence;
    let fails = |r: &ParameterEvidence| r.outcome == Overall::FailsEvidence;
    match q {
        Quantifier::All => {
            if rows.iter().all(holds) {
                Overall::HoldsEvidence
            } else if rows.iter().any(fails) {
                Overall::FailsEvidence
            } else {
                Overall::Inconclusive
            }
        }
        Quantifier::Some => {
            if rows.iter().any(holds) {
                Overall::HoldsEvidence
            } else if !rows.is_empty() && rows.iter().all(fails) {
                Overall::FailsEvidence
            } else {
                Overall::Inconclusive
            }
        }
    }
}

/// Whether `v` has any positive atom at all.
pub(super) fn has_positive_atoms(v: &Distribution) -> bool {
    let set = v.atom_set();
    set.lattice.is_some() || set.finite.iter().any(|a| a.location > 0.0)
}

/// Probe set of atom locations: atoms of mass `>= floor` at locations
/// `<= ceiling`, plus the user values, sorted and deduplicated.
fn probe_atoms(v: &Distribution, cfg: &DiagConfig, extra: &[f64]) -> Vec<f64> {
    let mut d: Vec<f64> = v
        .discontinuities(cfg.class.atom_floor, cfg.class.atom_ceiling)
        .into_iter()
        .map(|a| a.location)
        .collect();
    d.extend(extra.iter().copied().filter(|x| *x > 0.0));
    d.sort_by(|a, b| a.total_cmp(b));
    d.dedup();
    d
}

/// Points of the evaluation grid for a condition on `(F, G)`.
fn grid_for(f: &Distribution, g: &Distribution, params: &ConditionParams, cfg: &DiagConfig) -> Result<Vec<f64>> {
    if let Some(gr) = &params.grid {
        gr.validate()?;
        return Ok(gr.points());
    }
    for law in [g, f] {
        if law.example31_knots().is_some() {
            return Ok(super::example31_knot_grid(law, 1));
        }
    }
    Ok(cfg.grid.points())
}

/// Checks `cond` for the product of `F` and `G` on a finite grid.
pub fn check_condition(
    cond: ConditionId,
    f: &Distribution,
    g: &Distribution,
    params: &ConditionParams,
    cfg: &DiagConfig,
    exec: &dyn Executor,
) -> Result<ConditionReport> {
    cfg.validate()?;
    let xs = grid_for(f, g, params, cfg)?;
    let th = &cfg.thresholds;
    let q = cfg.quad;
    let h = |x: f64| product_tail(f, g, x, &q).map(|v| v.ln());
    let mut rows = Vec::new();
    let mut notes = Vec::new();
    let need_a = || -> Result<&AFunction> {
        let a = params
            .a
            .as_ref()
            .ok_or_else(|| Error::param("check", "a", "this condition needs a function a(x)"))?;
        a.validate()?;
        Ok(a)
    };
    let quantifier = match cond {
        ConditionId::Eq13 | ConditionId::Eq14 => Quantifier::Some,
        _ => Quantifier::All,
    };
    match cond {
        ConditionId::Eq11 => {
            if params.b_values.is_empty() || params.b_values.iter().any(|b| !(*b > 0.0)) {
                return Err(Error::param("check", "b_values", "need positive b values"));
            }
            for &b in &params.b_values {
                let d = ratio_curve(&|x| Ok(g.ln_sf(x)), &|x| h(b * x), &xs, th, exec)?;
                push(&mut rows, th, format!("b={b}"), b, Requirement::LittleO, d);
            }
        }
        ConditionId::Eq12 => {
            let ds = probe_atoms(f, cfg, &params.extra_d);
            if ds.is_empty() {
                if has_positive_atoms(f) {
                    notes.push("D[F] is nonempty but no atom passes the probe floor/ceiling".into());
                    return Ok(ConditionReport {
                        condition: cond,
                        quantifier,
                        parameter_evidence: rows,
                        overall: Overall::Inconclusive,
                        notes,
                    });
                }
                notes.push("D[F] is empty: the condition holds vacuously".into());
                return Ok(ConditionReport {
                    condition: cond,
                    quantifier,
                    parameter_evidence: rows,
                    overall: Overall::HoldsEvidence,
                    notes,
                });
            }
            for &d in &ds {
                // Ḡ(x/d) - Ḡ((x+1)/d), with the shift applied exactly
                let num = |x: f64| Ok(g.ln_sf(x / d) + log1mexp(g.ln_sf_shift_ratio(x / d, 1.0 / d)));
                let r = ratio_curve(&num, &h, &xs, th, exec)?;
                push(&mut rows, th, format!("d={d}"), d, Requirement::LittleO, r);
            }
        }
        ConditionId::Eq13 => {
            if params.t_values.is_empty() || params.t_values.iter().any(|t| !(*t >= 1.0)) {
                return Err(Error::param("check", "t_values", "need values t >= 1"));
            }
            for &t in &params.t_values {
                let d = ratio_curve(&h, &|x| Ok(f.ln_sf(x / t)), &xs, th, exec)?;
                push(&mut rows, th, format!("t={t}"), t, Requirement::BigO, d);
            }
        }
        ConditionId::Eq14 => {
            let ds = probe_atoms(g, cfg, &params.extra_d);
            if ds.is_empty() {
                notes.push(if has_positive_atoms(g) {
                    "D[G] is nonempty but no atom passes the probe floor/ceiling".into()
                } else {
                    "D[G] is empty: no d exists".into()
                });
                let overall = if has_positive_atoms(g) {
                    Overall::Inconclusive
                } else {
                    Overall::FailsEvidence
                };
                return Ok(ConditionReport {
                    condition: cond,
                    quantifier,
                    parameter_evidence: rows,
                    overall,
                    notes,
                });
            }
            for &d in &ds {
                let r = ratio_curve(&h, &|x| Ok(f.ln_sf(x / d)), &xs, th, exec)?;
                push(&mut rows, th, format!("d={d}"), d, Requirement::BigO, r);
            }
        }
        ConditionId::T1aD => {
            let a = need_a()?;
            let c = super::shift_ratio_curve(f, &|x| -a.eval(x), &xs, th, exec)?;
            push(&mut rows, th, format!("(c) F(x-a(x))~F(x), {}", a.label()), f64::NAN, Requirement::Equivalent, c);
            let d = ratio_curve(&|x| Ok(g.ln_sf(a.eval(x))), &h, &xs, th, exec)?;
            push(&mut rows, th, format!("(d) G(a(x))=o(H(x)), {}", a.label()), f64::NAN, Requirement::LittleO, d);
        }
        ConditionId::T31 => {
            let a = need_a()?;
            premise_notes(f, g, &mut notes);
            let d3 = ratio_curve(&|x| Ok(g.ln_sf(a.eval(x))), &h, &xs, th, exec)?;
            push(&mut rows, th, format!("(3.3) G(a(x))=O(H(x)), {}", a.label()), f64::NAN, Requirement::BigO, d3);
            let d4 = ratio_curve(&|x| Ok(f.ln_sf(x / a.eval(x))), &h, &xs, th, exec)?;
            push(&mut rows, th, format!("(3.4) F(x/a(x))=O(H(x)), {}", a.label()), f64::NAN, Requirement::BigO, d4);
        }
        ConditionId::T32 => {
            let a = need_a()?;
            premise_notes(f, g, &mut notes);
            for (name, law) in [("F", f), ("G", g)] {
                let d = super::shift_ratio_curve(law, &|x| -1.0 / x, &xs, th, exec)?;
                push(&mut rows, th, format!("(3.8) {name}(x-1/x)~{name}(x)"), f64::NAN, Requirement::Equivalent, d);
            }
            let d9 = ratio_curve(&|x| Ok(g.ln_sf(a.eval(x))), &h, &xs, th, exec)?;
            push(&mut rows, th, format!("(3.9) G(a(x))=O(H(x)), {}", a.label()), f64::NAN, Requirement::BigO, d9);
            let d10 = ratio_curve(&|x| Ok(f.ln_sf(a.eval(x))), &h, &xs, th, exec)?;
            push(&mut rows, th, format!("(3.10) F(a(x))=O(H(x)), {}", a.label()), f64::NAN, Requirement::BigO, d10);
        }
    }
    let overall = aggregate(quantifier, &rows);
    Ok(ConditionReport {
        condition: cond,
        quantifier,
        parameter_evidence: rows,
        overall,
        notes,
    })
}

fn push(rows: &mut Vec<ParameterEvidence>, th: &Thresholds, label: String, parameter: f64, req: Requirement, d: RatioDiagnostic) {
    rows.push(ParameterEvidence {
        label,
        parameter,
        requirement: req,
        outcome: grade(req, &d, th),
        diagnostic: d,
    });
}

fn premise_notes(f: &Distribution, g: &Distribution, notes: &mut Vec<String>) {
    for (name, law) in [("F", f), ("G", g)] {
        if law.has_atoms() {
            notes.push(format!("{name} has atoms; the continuity premise does not hold"));
        }
    }
}
