//! Versioned report documents and plot-ready CSV curves.
//!
//! A report is `{"schema_version", "command", "status", "result", ...}`.
//! Extended reals (`-inf` log-probabilities, `NaN` for dropped ratio
//! points) are written as the strings `"-inf"`, `"inf"`, `"nan"`.
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use htail_core::convolve::{McEstimate, TailEstimate};
use htail_core::diagnostics::{ClassReport, ConditionReport, RatioDiagnostic, Theorem11Verdict};
use htail_core::dist::FamilySpec;
use htail_core::logtail::ext_f64;
use htail_core::risk::{AsymptoticReport, GuardResult, LowerBoundReport, RiskModelSpec, RuinEstimate};
use htail_core::LogTailValue;
use serde::{Deserialize, Serialize};

pub use crate::input::SCHEMA_VERSION;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    /// Some points failed numerically; the rest are present.
    Partial,
    InputError,
    /// A premise or domain check declined the computation.
    Refused,
    NumericalFailure,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorInfo {
    pub message: String,
    /// `ln` of the partial estimate, for quadrature failures.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partial_log: Option<LogTailValue>,
}

/// A point where the evaluation failed; the curve omits it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointFailure {
    #[serde(with = "ext_f64")]
    pub x: f64,
    pub error: ErrorInfo,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailPoint {
    #[serde(with = "ext_f64")]
    pub x: f64,
    pub value: LogTailValue,
}

/// `ln P(X > x)` of a single law.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub law: FamilySpec,
    pub label: String,
    pub points: Vec<TailPoint>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProductPoint {
    #[serde(with = "ext_f64")]
    pub x: f64,
    pub estimate: TailEstimate,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mc: Option<McEstimate>,
}

/// `ln P(XY > x)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvolveResult {
    pub f: FamilySpec,
    pub g: FamilySpec,
    pub points: Vec<ProductPoint>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub failures: Vec<PointFailure>,
}

/// `ln P(X_1 + ... + X_k > x)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelfConvResult {
    pub law: FamilySpec,
    pub k: usize,
    pub points: Vec<TailPoint>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub failures: Vec<PointFailure>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RuinPoint {
    pub mc: RuinEstimate,
    /// `ln Σ_{i<=n} H̄_i(x)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub asymptotic: Option<LogTailValue>,
    /// Monte Carlo estimate over the asymptotic value.
    #[serde(default, skip_serializing_if = "Option::is_none", with = "opt_ext")]
    pub ratio: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RuinResult {
    pub model: RiskModelSpec,
    pub n: usize,
    pub points: Vec<RuinPoint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evidence: Option<AsymptoticReport>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub failures: Vec<PointFailure>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundResult {
    pub model: RiskModelSpec,
    pub guard: GuardResult,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bound: Option<LowerBoundReport>,
    /// Finite-horizon ruin estimate at horizon `i*`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon_mc: Option<RuinEstimate>,
    /// `horizon_mc` over the series value.
    #[serde(default, skip_serializing_if = "Option::is_none", with = "opt_ext")]
    pub mc_over_series: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", content = "result", rename_all = "snake_case")]
pub enum Output {
    Eval(EvalResult),
    Convolve(ConvolveResult),
    Selfconv(SelfConvResult),
    Classify(ClassReport),
    Check(ConditionReport),
    Verdict(Theorem11Verdict),
    Ruin(RuinResult),
    Bound(BoundResult),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub status: Status,
    #[serde(flatten)]
    pub output: Option<Output>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorInfo>,
}

impl Report {
    pub fn ok(output: Output) -> Self {
        Report {
            schema_version: SCHEMA_VERSION,
            status: Status::Ok,
            output: Some(output),
            error: None,
        }
    }

    pub fn failed(status: Status, error: ErrorInfo, output: Option<Output>) -> Self {
        Report {
            schema_version: SCHEMA_VERSION,
            status,
            output,
            error: Some(error),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports serialize");
        s.push('\n');
        s
    }

    pub fn from_json(s: &str) -> serde_json::Result<Self> {
        serde_json::from_str(s)
    }
}

/// A named `(x, value)` series, `value` being a natural logarithm.
#[derive(Clone, Debug, PartialEq)]
pub struct Curve {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

impl Curve {
    /// Drops NaN values and non-finite `x`; keeps the first of repeated `x`.
    fn new(name: impl Into<String>, pts: impl IntoIterator<Item = (f64, f64)>) -> Self {
        let mut points: Vec<(f64, f64)> = Vec::new();
        for (x, v) in pts {
            if !x.is_finite() || v.is_nan() {
                continue;
            }
            if points.last().is_some_and(|&(px, _)| px >= x) {
                continue;
            }
            points.push((x, v));
        }
        Curve {
            name: name.into(),
            points,
        }
    }

    fn from_diagnostic(name: impl Into<String>, d: &RatioDiagnostic) -> Self {
        Curve::new(name, d.x_grid.iter().copied().zip(d.log_ratios.iter().copied()))
    }

    /// `x,value` rows; `-inf` and `inf` are written as those tokens.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("x,value\n");
        for &(x, v) in &self.points {
            let v = if v == f64::NEG_INFINITY {
                "-inf".to_string()
            } else if v == f64::INFINITY {
                "inf".to_string()
            } else {
                format!("{v:e}")
            };
            writeln!(s, "{x:e},{v}").expect("string write");
        }
        s
    }
}

fn slug(s: &str) -> String {
    let mut out = String::new();
    for c in s.chars() {
        if c.is_ascii_alphanumeric() || c == '.' || c == '-' {
            out.push(c);
        } else if !out.ends_with('_') {
            out.push('_');
        }
    }
    out.trim_matches('_').to_string()
}

fn class_curves(prefix: &str, r: &ClassReport, out: &mut Vec<Curve>) {
    for e in &r.evidence {
        out.push(Curve::from_diagnostic(format!("{prefix}{}", e.label), &e.diagnostic));
    }
}

fn condition_curves(prefix: &str, r: &ConditionReport, out: &mut Vec<Curve>) {
    for e in &r.parameter_evidence {
        out.push(Curve::from_diagnostic(format!("{prefix}{}", e.label), &e.diagnostic));
    }
}

impl Output {
    pub fn command(&self) -> &'static str {
        match self {
            Output::Eval(_) => "eval",
            Output::Convolve(_) => "convolve",
            Output::Selfconv(_) => "selfconv",
            Output::Classify(_) => "classify",
            Output::Check(_) => "check",
            Output::Verdict(_) => "verdict",
            Output::Ruin(_) => "ruin",
            Output::Bound(_) => "bound",
        }
    }

    /// Plot-ready curves, each strictly increasing in `x`.
    pub fn curves(&self) -> Vec<Curve> {
        let mut out = Vec::new();
        match self {
            Output::Eval(r) => out.push(Curve::new("ln_sf", r.points.iter().map(|p| (p.x, p.value.ln())))),
            Output::Selfconv(r) => out.push(Curve::new("ln_sf", r.points.iter().map(|p| (p.x, p.value.ln())))),
            Output::Convolve(r) => {
                out.push(Curve::new("ln_sf", r.points.iter().map(|p| (p.x, p.estimate.value.ln()))));
                if r.points.iter().any(|p| p.mc.is_some()) {
                    out.push(Curve::new(
                        "ln_mc",
                        r.points.iter().filter_map(|p| p.mc.map(|m| (p.x, m.estimate.ln()))),
                    ));
                }
            }
            Output::Classify(r) => class_curves("", r, &mut out),
            Output::Check(r) => condition_curves("", r, &mut out),
            Output::Verdict(r) => {
                class_curves("premise_", &r.premise, &mut out);
                if let htail_core::diagnostics::Branch::AtomCondition { report } = &r.branch {
                    condition_curves("branch_", report, &mut out);
                }
                class_curves("cross_check_", &r.cross_check, &mut out);
            }
            Output::Ruin(r) => {
                out.push(Curve::new("ln_ruin_mc", r.points.iter().map(|p| (p.mc.x, p.mc.point.ln()))));
                out.push(Curve::new(
                    "ln_asymptotic",
                    r.points.iter().filter_map(|p| p.asymptotic.map(|a| (p.mc.x, a.ln()))),
                ));
            }
            Output::Bound(r) => {
                if let Some(b) = &r.bound {
                    let max_i = b.checks.iter().map(|c| c.i).max().unwrap_or(0);
                    for i in 1..=max_i {
                        out.push(Curve::new(
                            format!("ln_term_ratio_i{i}"),
                            b.checks.iter().filter(|c| c.i == i).map(|c| (c.x, c.ln_ratio)),
                        ));
                    }
                }
            }
        }
        out
    }
}

/// Files written for `--format csv`: the single curve goes to `out`; with
/// several curves each goes to `<stem>.<name>.csv` next to `out`.
pub fn csv_files(out: &Path, curves: &[Curve]) -> Vec<(PathBuf, String)> {
    if curves.len() == 1 {
        return vec![(out.to_owned(), curves[0].to_csv())];
    }
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "curve".into());
    let dir = out.parent().unwrap_or_else(|| Path::new(""));
    curves
        .iter()
        .map(|c| (dir.join(format!("{stem}.{}.csv", slug(&c.name))), c.to_csv()))
        .collect()
}

mod opt_ext {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    struct W(#[serde(with = "htail_core::logtail::ext_f64")] f64);

    pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        v.map(W).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        Ok(Option::<W>::deserialize(d)?.map(|w| w.0))
    }
}
