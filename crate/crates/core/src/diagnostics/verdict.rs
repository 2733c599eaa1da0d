use alloc::format;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use super::{check_condition, classify, ClassId, ClassReport, ConditionId, ConditionParams, ConditionReport, DiagConfig, Membership, Overall};
use crate::convolve::product_dist;
use crate::dist::Distribution;
use crate::{Error, Executor, Result};

/// Which side of the criterion decided the prediction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Branch {
    /// `F` has no positive atoms.
    DfEmpty,
    /// `F` has atoms; the atom-increment condition decided.
    AtomCondition { report: ConditionReport },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Agreement {
    Agree,
    Disagree,
    Undetermined,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Theorem11Verdict {
    pub premise: ClassReport,
    pub d_f: Vec<f64>,
    pub branch: Branch,
    /// Predicted membership of the product in `S`.
    pub predicted: Membership,
    /// Direct `S` check on the product law.
    pub cross_check: ClassReport,
    pub agreement: Agreement,
}

/// For `F ∈ S`: `H ∈ S` iff `D[F]` is empty or the atom-increment
/// condition holds for every `d ∈ D[F]`. The prediction is compared with
/// a direct `S` check on the computed product law.
pub fn theorem11_verdict(f: &Distribution, g: &Distribution, cfg: &DiagConfig, exec: &dyn Executor) -> Result<Theorem11Verdict> {
    let premise = classify(f, ClassId::S, cfg, exec)?;
    if premise.membership != Membership::Member {
        let d = &premise.evidence[0].diagnostic;
        return Err(Error::PremiseFailed(format!(
            "F = {} is not subexponential on the grid: membership {:?}, verdict {:?}, trailing mean ratio {:.4}",
            f.label(),
            premise.membership,
            d.verdict,
            d.window.ln_mean.exp()
        )));
    }
    let d_f: Vec<f64> = f
        .discontinuities(cfg.class.atom_floor, cfg.class.atom_ceiling)
        .into_iter()
        .map(|a| a.location)
        .collect();
    let (branch, predicted) = if !super::conditions::has_positive_atoms(f) {
        (Branch::DfEmpty, Membership::Member)
    } else {
        let params = ConditionParams {
            grid: Some(cfg.grid.clone()),
            ..ConditionParams::default()
        };
        let report = check_condition(ConditionId::Eq12, f, g, &params, cfg, exec)?;
        let p = match report.overall {
            Overall::HoldsEvidence => Membership::Member,
            Overall::FailsEvidence => Membership::NonMember,
            Overall::Inconclusive => Membership::Inconclusive,
        };
        (Branch::AtomCondition { report }, p)
    };
    let h = product_dist(f, g, &cfg.product, &cfg.quad, exec)?;
    let cross_check = classify(&h, ClassId::S, cfg, exec)?;
    let agreement = match (predicted, cross_check.membership) {
        (Membership::Inconclusive, _) | (_, Membership::Inconclusive) => Agreement::Undetermined,
        (a, b) if a == b => Agreement::Agree,
        _ => Agreement::Disagree,
    };
    Ok(Theorem11Verdict {
        premise,
        d_f,
        branch,
        predicted,
        cross_check,
        agreement,
    })
}
