use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use super::{ratio_curve, DiagConfig, RatioDiagnostic, Verdict};
use crate::convolve::sum_self_tail_with;
use crate::dist::Distribution;
use crate::logtail::ext_f64;
use crate::{Error, Executor, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ClassId {
    #[serde(rename = "L_gamma")]
    LGamma,
    S,
    D,
    R,
    A,
}

impl core::str::FromStr for ClassId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "L_gamma" | "L" | "l_gamma" => Ok(ClassId::LGamma),
            "S" | "s" => Ok(ClassId::S),
            "D" | "d" => Ok(ClassId::D),
            "R" | "r" => Ok(ClassId::R),
            "A" | "a" => Ok(ClassId::A),
            _ => Err(Error::param("classify", "class", format!("unknown class `{s}`"))),
        }
    }
}

/// Per-class knobs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassParams {
    /// Shift `t` in `V̄(x - t)/V̄(x)`; rounded up to a multiple of the
    /// lattice span for laws with atoms.
    pub lgamma_shift: f64,
    /// Factors `t` in `V̄(tx)/V̄(x)` for the index fit.
    pub r_factors: Vec<f64>,
    /// Relative agreement required between the per-factor index estimates.
    pub r_agreement: f64,
    /// Factor `t` in `limsup V̄(tx)/V̄(x) < 1`.
    pub a_factor: f64,
    /// The limsup must stay below `1 - a_margin`.
    pub a_margin: f64,
    /// `|γ̂|` below this counts as long-tailed.
    pub long_tail_gamma: f64,
    /// Atoms lighter than this are ignored for span and probe sets.
    pub atom_floor: f64,
    /// Atoms beyond this are ignored for span and probe sets.
    pub atom_ceiling: f64,
}

impl Default for ClassParams {
    fn default() -> Self {
        ClassParams {
            lgamma_shift: 1.0,
            r_factors: vec![2.0, 4.0],
            r_agreement: 0.02,
            a_factor: 2.0,
            a_margin: 0.05,
            long_tail_gamma: 0.05,
            atom_floor: 1e-6,
            atom_ceiling: 20.0,
        }
    }
}

impl ClassParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.lgamma_shift > 0.0) {
            return Err(Error::param("class", "lgamma_shift", "must be > 0"));
        }
        if self.r_factors.len() < 2 || self.r_factors.iter().any(|t| !(*t > 1.0)) {
            return Err(Error::param("class", "r_factors", "need at least two factors > 1"));
        }
        if !(self.a_factor > 1.0) {
            return Err(Error::param("class", "a_factor", "must be > 1"));
        }
        if !(self.a_margin > 0.0 && self.a_margin < 1.0) {
            return Err(Error::param("class", "a_margin", "must lie in (0, 1)"));
        }
        if !(self.atom_floor >= 0.0) || !(self.atom_ceiling > 0.0) {
            return Err(Error::param("class", "atom_floor", "floor must be >= 0 and ceiling > 0"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Membership {
    Member,
    NonMember,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NamedDiagnostic {
    pub label: String,
    pub diagnostic: RatioDiagnostic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub name: String,
    #[serde(with = "ext_f64")]
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub class: ClassId,
    pub law: String,
    pub membership: Membership,
    pub evidence: Vec<NamedDiagnostic>,
    pub estimates: Vec<Estimate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl ClassReport {
    pub fn estimate(&self, name: &str) -> Option<f64> {
        self.estimates.iter().find(|e| e.name == name).map(|e| e.value)
    }
}

/// Greatest common span of the atom locations (within `1e-9` relative),
/// or `None` when the atoms are not on a common lattice.
pub fn lattice_span(v: &Distribution, floor: f64, ceiling: f64) -> Option<f64> {
    let locs: Vec<f64> = v.atoms(floor, ceiling).into_iter().map(|a| a.location).collect();
    if locs.is_empty() {
        return None;
    }
    let scale = locs.iter().fold(0.0f64, |m, l| m.max(l.abs())).max(1e-300);
    let tol = 1e-9 * scale;
    let mut g = 0.0f64;
    let mut push = |d: f64| {
        let (mut a, mut b) = (g.max(d.abs()), g.min(d.abs()));
        while b > tol {
            let r = a % b;
            a = b;
            b = r;
        }
        g = a;
    };
    for w in locs.windows(2) {
        push(w[1] - w[0]);
    }
    if locs.len() == 1 {
        push(locs[0]);
    }
    if !(g > tol) {
        return None;
    }
    // every gap must be a multiple of the span
    let ok = locs.windows(2).all(|w| {
        let k = (w[1] - w[0]) / g;
        k <= 1e6 && (k - k.round()).abs() <= 1e-6
    });
    ok.then_some(g)
}

fn est(name: &str, value: f64) -> Estimate {
    Estimate {
        name: name.to_string(),
        value,
    }
}

fn named(label: impl Into<String>, diagnostic: RatioDiagnostic) -> NamedDiagnostic {
    NamedDiagnostic {
        label: label.into(),
        diagnostic,
    }
}

/// Scale-ratio curve `V̄(t x)/V̄(x)`.
fn scale_ratio(v: &Distribution, t: f64, xs: &[f64], cfg: &DiagConfig, exec: &dyn Executor) -> Result<RatioDiagnostic> {
    ratio_curve(&|x| Ok(v.ln_sf(t * x)), &|x| Ok(v.ln_sf(x)), xs, &cfg.thresholds, exec)
}

/// Graded evidence for `v` belonging to `class`.
///
/// - `L_gamma`: `V̄(x - t)/V̄(x) → e^{γt}`; reports `gamma`.
/// - `S`: `V̄*²(x)/V̄(x) → 2`.
/// - `D`: `V̄(x/2)/V̄(x)` bounded; reports the bound `M`.
/// - `R`: `V̄(tx)/V̄(x) → t^{-α}` with matching `α` across factors; reports `alpha`.
/// - `A`: `S` together with `limsup V̄(tx)/V̄(x) <= 1 - margin`.
pub fn classify(v: &Distribution, class: ClassId, cfg: &DiagConfig, exec: &dyn Executor) -> Result<ClassReport> {
    cfg.validate()?;
    let xs = cfg.grid.points();
    let th = &cfg.thresholds;
    let p = &cfg.class;
    let mut report = ClassReport {
        class,
        law: v.label().to_string(),
        membership: Membership::Inconclusive,
        evidence: Vec::new(),
        estimates: Vec::new(),
        note: None,
    };
    match class {
        ClassId::LGamma => {
            let t = if v.has_atoms() {
                match lattice_span(v, p.atom_floor, f64::INFINITY) {
                    Some(s) => s * (p.lgamma_shift / s).ceil().max(1.0),
                    None => {
                        report.note = Some("atoms present but no common lattice span".into());
                        return Ok(report);
                    }
                }
            } else {
                p.lgamma_shift
            };
            let d = super::shift_ratio_curve(v, &|_| -t, &xs, th, exec)?;
            report.estimates.push(est("shift", t));
            if let Verdict::ConvergesTo(c) = d.verdict {
                report.membership = Membership::Member;
                report.estimates.push(est("gamma", c.ln() / t));
            } else if d.verdict == Verdict::Diverges {
                report.membership = Membership::NonMember;
            }
            report.evidence.push(named(format!("sf(x-{t})/sf(x)"), d));
        }
        ClassId::S => {
            if v.support().0 < 0.0 {
                return Err(Error::Unsupported(format!(
                    "class S check needs a law on [0, inf), got {}",
                    v.label()
                )));
            }
            let q = cfg.quad;
            let d = ratio_curve(
                &|x| sum_self_tail_with(v, 2, x, &q, &crate::Serial).map(|l| l.ln()),
                &|x| Ok(v.ln_sf(x)),
                &xs,
                th,
                exec,
            )?;
            report.membership = match d.verdict {
                Verdict::ConvergesTo(c) if (c - 2.0).abs() <= 2.0 * th.tol_c => Membership::Member,
                Verdict::ConvergesTo(_) | Verdict::Diverges => Membership::NonMember,
                _ => Membership::Inconclusive,
            };
            if let Verdict::ConvergesTo(c) = d.verdict {
                report.estimates.push(est("ratio_limit", c));
            }
            report.evidence.push(named("sf2(x)/sf(x)", d));
        }
        ClassId::D => {
            let d = scale_ratio(v, 0.5, &xs, cfg, exec)?;
            report.membership = match d.verdict {
                Verdict::ConvergesTo(_) | Verdict::Bounded(_) => Membership::Member,
                Verdict::Diverges => Membership::NonMember,
                _ => Membership::Inconclusive,
            };
            if report.membership == Membership::Member {
                report.estimates.push(est("M", d.window.ln_max.exp()));
            }
            report.evidence.push(named("sf(x/2)/sf(x)", d));
        }
        ClassId::R => {
            let mut alphas = Vec::new();
            let mut light = false;
            let mut unresolved = false;
            for &t in &p.r_factors {
                let d = scale_ratio(v, t, &xs, cfg, exec)?;
                match d.verdict {
                    Verdict::ConvergesTo(c) => {
                        let a = -c.ln() / t.ln();
                        report.estimates.push(est(&format!("alpha_t{t}"), a));
                        alphas.push(a);
                    }
                    Verdict::Vanishes => light = true,
                    _ => unresolved = true,
                }
                report.evidence.push(named(format!("sf({t}x)/sf(x)"), d));
            }
            if light {
                report.membership = Membership::NonMember;
            } else if !unresolved {
                let mean = alphas.iter().sum::<f64>() / alphas.len() as f64;
                let spread = alphas.iter().fold(0.0f64, |m, a| m.max((a - mean).abs()));
                if spread <= p.r_agreement * mean.abs().max(1e-12) {
                    report.membership = Membership::Member;
                    report.estimates.push(est("alpha", mean));
                } else {
                    report.membership = Membership::NonMember;
                }
            }
        }
        ClassId::A => {
            let s = classify(v, ClassId::S, cfg, exec)?;
            let d = scale_ratio(v, p.a_factor, &xs, cfg, exec)?;
            let limsup = d.window.ln_max.exp();
            let contracts = !d.window.ln_max.is_nan() && limsup <= 1.0 - p.a_margin;
            let flat = matches!(d.verdict, Verdict::ConvergesTo(c) if c > 1.0 - 0.5 * p.a_margin);
            report.membership = match s.membership {
                Membership::Member if contracts => Membership::Member,
                Membership::NonMember => Membership::NonMember,
                _ if flat => Membership::NonMember,
                _ => Membership::Inconclusive,
            };
            report.estimates.push(est("limsup", limsup));
            report.estimates.extend(s.estimates);
            report.evidence.extend(s.evidence);
            report.evidence.push(named(format!("sf({}x)/sf(x)", p.a_factor), d));
        }
    }
    Ok(report)
}
