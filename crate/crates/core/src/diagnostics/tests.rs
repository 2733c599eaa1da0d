use super::*;
use crate::dist::{Atom, Distribution};
use crate::math::ln_hurwitz_zeta;
use crate::Serial;
use alloc::vec;
use proptest::prelude::*;

fn cfg() -> DiagConfig {
    DiagConfig::default()
}

fn th() -> Thresholds {
    Thresholds::default()
}

fn curve(r: Vec<f64>) -> RatioDiagnostic {
    let xs = (0..r.len()).map(|i| 10.0 * 1.5f64.powi(i as i32)).collect();
    RatioDiagnostic::from_log_ratios(xs, r, &th())
}

#[test]
fn shift_ratio_of_exponential_converges_to_e() {
    let e = Distribution::exponential(1.0).unwrap();
    let xs = cfg().grid.points();
    let d = ratio_curve(&|x| Ok(e.ln_sf(x - 1.0)), &|x| Ok(e.ln_sf(x)), &xs, &th(), &Serial).unwrap();
    match d.verdict {
        Verdict::ConvergesTo(c) => assert!((c - core::f64::consts::E).abs() < 1e-9),
        v => panic!("{v:?}"),
    }
    let same = ratio_curve(&|x| Ok(e.ln_sf(x)), &|x| Ok(e.ln_sf(x)), &xs, &th(), &Serial).unwrap();
    assert_eq!(same.verdict, Verdict::ConvergesTo(1.0));
}

#[test]
fn knotted_law_shift_ratio_tends_to_two() {
    let g = Distribution::example31_g(1.0, 5.0).unwrap();
    let xs = example31_doubled_knots(&g, 1);
    assert!(xs.len() >= 8);
    let d = ratio_curve(&|x| Ok(g.ln_sf_offset(x, -1.0)), &|x| Ok(g.ln_sf(x)), &xs, &th(), &Serial).unwrap();
    let knots = example31_knot_grid(&g, 1);
    for (r, xn) in d.log_ratios.iter().zip(&knots) {
        assert!((r.exp() - (2.0 - 1.0 / xn)).abs() <= 1e-9);
    }
    match d.verdict {
        Verdict::ConvergesTo(c) => assert!((c - 2.0).abs() < 0.05),
        v => panic!("{v:?}"),
    }
}

#[test]
fn verdict_rules() {
    // strictly decreasing below the floor
    let v = curve((0..12).map(|i| -20.0 - i as f64).collect());
    assert_eq!(v.verdict, Verdict::Vanishes);
    // exact zeros vanish too
    let z = curve(vec![f64::NEG_INFINITY; 12]);
    assert_eq!(z.verdict, Verdict::Vanishes);
    // growth by 1.5 per step
    let g = curve((0..12).map(|i| i as f64 * 1.5f64.ln()).collect());
    assert_eq!(g.verdict, Verdict::Diverges);
    // oscillation between 1 and 3
    let o = curve((0..12).map(|i| if i % 2 == 0 { 0.0 } else { 3.0f64.ln() }).collect());
    assert!(matches!(o.verdict, Verdict::Bounded(m) if (m - 3.0).abs() < 1e-12));
    // four of twelve dropped
    let mut r: Vec<f64> = vec![0.0; 12];
    for i in [0, 3, 6, 9] {
        r[i] = f64::NAN;
    }
    let d = curve(r);
    assert_eq!(d.verdict, Verdict::Inconclusive);
    assert_eq!(d.dropped, vec![0, 3, 6, 9]);
    // too short for the window
    assert_eq!(curve(vec![0.0; 5]).verdict, Verdict::Inconclusive);
}

#[test]
fn zero_denominator_points_are_dropped() {
    let u = Distribution::uniform(0.0, 1.0).unwrap();
    let xs = cfg().grid.points();
    let d = ratio_curve(&|x| Ok(u.ln_sf(x)), &|x| Ok(u.ln_sf(x)), &xs, &th(), &Serial).unwrap();
    assert_eq!(d.dropped.len(), xs.len());
    assert_eq!(d.verdict, Verdict::Inconclusive);
}

#[test]
fn exponential_lgamma_and_light_tail() {
    let e = Distribution::exponential(1.0).unwrap();
    let r = classify(&e, ClassId::LGamma, &cfg(), &Serial).unwrap();
    assert_eq!(r.membership, Membership::Member);
    assert!((r.estimate("gamma").unwrap() - 1.0).abs() < 1e-9);
    let s = classify(&e, ClassId::S, &cfg(), &Serial).unwrap();
    assert_eq!(s.membership, Membership::NonMember);
    assert_eq!(s.evidence[0].diagnostic.verdict, Verdict::Diverges);
    let rr = classify(&e, ClassId::R, &cfg(), &Serial).unwrap();
    assert_eq!(rr.membership, Membership::NonMember);
}

#[test]
fn pareto_one_pair_sum_closed_form() {
    // V̄(t) = 1/t on [1, ∞): P(X₁+X₂ > x) = 1/(x-1) + (1 - 1/(x-1))/x + 2 ln(x-1)/x²
    let v = Distribution::regvar(1.0, 1.0).unwrap();
    let q = crate::quad::QuadratureSpec::default();
    for x in [10.0f64, 1e3, 1e6] {
        let exact = 1.0 / (x - 1.0) + (1.0 - 1.0 / (x - 1.0)) / x + 2.0 * (x - 1.0).ln() / (x * x);
        let got = crate::convolve::sum_self_tail(&v, 2, x, &q).unwrap().prob();
        assert!(((got - exact) / exact).abs() < 1e-7, "x={x}: {got} vs {exact}");
    }
    let c = DiagConfig {
        grid: crate::grid::EvalGrid::spanning(10.0, 1e3, 32),
        ..cfg()
    };
    let s = classify(&v, ClassId::S, &c, &Serial).unwrap();
    assert_eq!(s.membership, Membership::Member);
    let last = s.evidence[0].diagnostic.log_ratios.last().unwrap().exp();
    assert!((last - 2.0).abs() < 0.05, "{last}");
}

#[test]
fn regular_variation_index_and_dominated_bound() {
    for beta in [0.5, 1.0, 2.0, 3.5] {
        let v = Distribution::regvar(beta, 1.0).unwrap();
        let r = classify(&v, ClassId::R, &cfg(), &Serial).unwrap();
        assert_eq!(r.membership, Membership::Member);
        assert!((r.estimate("alpha").unwrap() - beta).abs() <= 0.01 * beta);
        let d = classify(&v, ClassId::D, &cfg(), &Serial).unwrap();
        assert_eq!(d.membership, Membership::Member);
        let m = d.estimate("M").unwrap();
        assert!((m / 2f64.powf(beta) - 1.0).abs() <= 0.05);
    }
}

#[test]
fn class_a_for_pareto() {
    let v = Distribution::regvar(2.0, 1.0).unwrap();
    let a = classify(&v, ClassId::A, &cfg(), &Serial).unwrap();
    assert_eq!(a.membership, Membership::Member);
    assert!((a.estimate("limsup").unwrap() - 0.25).abs() < 1e-9);
}

#[test]
fn verdicts_survive_rescaling() {
    let laws = [
        Distribution::regvar(2.0, 1.0).unwrap(),
        Distribution::exponential(1.0).unwrap(),
        Distribution::weibull_type(0.5).unwrap(),
        Distribution::lattice_power(3.0).unwrap(),
    ];
    for v in &laws {
        for class in [ClassId::LGamma, ClassId::S, ClassId::D, ClassId::R, ClassId::A] {
            let base = classify(v, class, &cfg(), &Serial).unwrap().membership;
            for c in [0.5, 2.0] {
                let w = v.scale(c).unwrap();
                let m = classify(&w, class, &cfg(), &Serial).unwrap().membership;
                assert_eq!(m, base, "{} scaled by {c}, class {class:?}", v.label());
            }
        }
    }
}

#[test]
fn lattice_span_detection() {
    let l = Distribution::lattice_power(3.0).unwrap();
    assert!((lattice_span(&l, 1e-6, 20.0).unwrap() - 1.0).abs() < 1e-12);
    let d = Distribution::discrete(vec![
        Atom { location: 0.5, mass: 0.25 },
        Atom { location: 3.0, mass: 0.75 },
    ])
    .unwrap();
    assert!((lattice_span(&d, 0.0, 20.0).unwrap() - 2.5).abs() < 1e-12);
    let irr = Distribution::discrete(vec![
        Atom { location: 1.0, mass: 0.25 },
        Atom { location: core::f64::consts::SQRT_2, mass: 0.5 },
        Atom { location: 2.0, mass: 0.25 },
    ])
    .unwrap();
    assert!(lattice_span(&irr, 0.0, 20.0).is_none());
    let r = classify(&irr, ClassId::LGamma, &cfg(), &Serial).unwrap();
    assert_eq!(r.membership, Membership::Inconclusive);
}

/// `ln Σ C n^{-3} e^{-x/n}` by plain summation.
fn lattice_exp_tail(x: f64) -> f64 {
    let ln_c = -ln_hurwitz_zeta(3.0, 1.0);
    let mut s = 0.0;
    let n_max = 4_000_000u64;
    for n in 1..n_max {
        let y = n as f64;
        s += (ln_c - 3.0 * y.ln() - x / y).exp();
    }
    // e^{-x/n} <= 1 beyond n_max
    s += (ln_c + ln_hurwitz_zeta(3.0, n_max as f64)).exp() * (-x / n_max as f64).exp();
    s.ln()
}

#[test]
fn atom_increment_condition_lattice_exponential() {
    let f = Distribution::lattice_power(3.0).unwrap();
    let g = Distribution::exponential(1.0).unwrap();
    let params = ConditionParams {
        extra_d: vec![1.0, 2.0, 3.0],
        ..Default::default()
    };
    let c = DiagConfig {
        class: ClassParams {
            atom_ceiling: 3.0,
            ..Default::default()
        },
        ..cfg()
    };
    let r = check_condition(ConditionId::Eq12, &f, &g, &params, &c, &Serial).unwrap();
    assert_eq!(r.parameter_evidence.len(), 3);
    assert_eq!(r.overall, Overall::HoldsEvidence);
    for p in &r.parameter_evidence {
        assert_eq!(p.diagnostic.verdict, Verdict::Vanishes);
    }
    // the ratio itself against direct summation
    let q = crate::quad::QuadratureSpec::default();
    let h = crate::convolve::product_tail(&f, &g, 50.0, &q).unwrap().ln();
    let oracle = lattice_exp_tail(50.0);
    assert!((h - oracle).abs() < 1e-8, "{h} vs {oracle}");
    let ratio = (-50.0f64 + (-(-1.0f64).exp_m1()).ln() - oracle).exp();
    assert!(ratio <= 1e-10);
}

#[test]
fn atom_increment_condition_without_atoms() {
    let f = Distribution::regvar(2.0, 1.0).unwrap();
    let g = Distribution::exponential(1.0).unwrap();
    let r = check_condition(ConditionId::Eq12, &f, &g, &ConditionParams::default(), &cfg(), &Serial).unwrap();
    assert_eq!(r.overall, Overall::HoldsEvidence);
    assert!(r.parameter_evidence.is_empty());
    assert!(r.notes[0].contains("empty"));
}

#[test]
fn knotted_pair_fails_scaled_domination() {
    let f = Distribution::example31_f(1.0).unwrap();
    let g = Distribution::example31_g(1.0, 5.0).unwrap();
    let params = ConditionParams {
        b_values: vec![0.5, 1.0, 2.0],
        ..Default::default()
    };
    let r = check_condition(ConditionId::Eq11, &f, &g, &params, &cfg(), &Serial).unwrap();
    assert_eq!(r.overall, Overall::FailsEvidence);
    for p in &r.parameter_evidence {
        assert_eq!(p.outcome, Overall::FailsEvidence, "{}", p.label);
    }
    // b = 1 along the knots: the ratio tends to one
    let b1 = &r.parameter_evidence[1].diagnostic;
    let tail = b1.trailing(3);
    assert!(tail.iter().all(|r| r.exp() > 0.9 && r.exp() <= 1.0 + 1e-9));
}

#[test]
fn unit_factor_domination() {
    let f = Distribution::weibull_type(0.5).unwrap();
    let one = Distribution::degenerate(1.0).unwrap();
    let params = ConditionParams {
        t_values: vec![1.0],
        ..Default::default()
    };
    let r = check_condition(ConditionId::Eq13, &f, &one, &params, &cfg(), &Serial).unwrap();
    assert_eq!(r.parameter_evidence[0].diagnostic.verdict, Verdict::ConvergesTo(1.0));
    assert_eq!(r.overall, Overall::HoldsEvidence);
}

#[test]
fn atom_domination_for_two_point_factor() {
    let f = Distribution::regvar(2.0, 1.0).unwrap();
    let g = Distribution::discrete(vec![
        Atom { location: 1.0, mass: 0.5 },
        Atom { location: 2.0, mass: 0.5 },
    ])
    .unwrap();
    let r = check_condition(ConditionId::Eq14, &f, &g, &ConditionParams::default(), &cfg(), &Serial).unwrap();
    assert_eq!(r.quantifier, Quantifier::Some);
    assert_eq!(r.overall, Overall::HoldsEvidence);
    // d = 1: H̄(x)/F̄(x) → (1 + 4)/2, bounded
    assert_eq!(r.parameter_evidence[0].outcome, Overall::HoldsEvidence);
    let cont = Distribution::exponential(1.0).unwrap();
    let r = check_condition(ConditionId::Eq14, &f, &cont, &ConditionParams::default(), &cfg(), &Serial).unwrap();
    assert_eq!(r.overall, Overall::FailsEvidence);
}

#[test]
fn weibull_square_local_conditions() {
    let w = Distribution::weibull_type(2.0).unwrap();
    let params = ConditionParams {
        a: Some(AFunction::Power {
            coef: 1.0,
            exponent: 0.75,
        }),
        ..Default::default()
    };
    let r = check_condition(ConditionId::T32, &w, &w, &params, &cfg(), &Serial).unwrap();
    let rows = &r.parameter_evidence;
    assert_eq!(rows.len(), 4);
    for row in &rows[..2] {
        match row.diagnostic.verdict {
            Verdict::ConvergesTo(c) => assert!((c / core::f64::consts::E.powi(2) - 1.0).abs() < 1e-6),
            v => panic!("{v:?}"),
        }
        assert_eq!(row.outcome, Overall::FailsEvidence);
    }
    assert_eq!(rows[2].outcome, Overall::HoldsEvidence);
    assert_eq!(rows[3].outcome, Overall::HoldsEvidence);
    assert_eq!(r.overall, Overall::FailsEvidence);
}

#[test]
fn power_a_validation() {
    let w = Distribution::weibull_type(2.0).unwrap();
    let bad = ConditionParams {
        a: Some(AFunction::Power {
            coef: 1.0,
            exponent: 1.0,
        }),
        ..Default::default()
    };
    assert!(check_condition(ConditionId::T31, &w, &w, &bad, &cfg(), &Serial).is_err());
    assert!(check_condition(ConditionId::T31, &w, &w, &ConditionParams::default(), &cfg(), &Serial).is_err());
}

#[test]
fn exponential_pair_fails_split_domination() {
    let e = Distribution::exponential(1.0).unwrap();
    let params = ConditionParams {
        a: Some(AFunction::Power {
            coef: 1.0,
            exponent: 0.5,
        }),
        ..Default::default()
    };
    let r = check_condition(ConditionId::T31, &e, &e, &params, &cfg(), &Serial).unwrap();
    assert_eq!(r.overall, Overall::FailsEvidence);
    assert!(r.notes.is_empty());
}

#[test]
fn insensitivity_for_pareto() {
    let f = Distribution::regvar(2.0, 1.0).unwrap();
    let c = DiagConfig {
        grid: crate::grid::EvalGrid::geometric(100.0, 1.5, 40),
        ..cfg()
    };
    let a = build_insensitivity(&f, 0.01, &c, &Serial).unwrap();
    let expect = 100.0 * (1.0 - 1.01f64.powf(-0.5));
    assert!((a.eval(100.0) - expect).abs() < 1e-9, "{}", a.eval(100.0));
    assert!((a.eval(100.0) - 0.496).abs() < 1e-3);
    for (i, (&x, &v)) in a.xs.iter().zip(&a.a).enumerate() {
        assert!(v <= x.sqrt() * (1.0 + 1e-15));
        assert!(f.ln_sf_shift_ratio(x, -v) <= 0.01f64.ln_1p() + 1e-12);
        if i > 0 {
            assert!(v >= a.a[i - 1]);
            assert!(v / x <= a.a[i - 1] / a.xs[i - 1]);
        }
    }
    // between and beyond the nodes
    let mut prev = (0.0, f64::INFINITY);
    for k in 0..400 {
        let x = 50.0 * 1.07f64.powi(k);
        let v = a.eval(x);
        assert!(v >= prev.0 && v / x <= prev.1 * (1.0 + 1e-12));
        prev = (v, v / x);
    }
    let e = Distribution::exponential(1.0).unwrap();
    assert!(matches!(build_insensitivity(&e, 0.01, &cfg(), &Serial), Err(crate::Error::PremiseFailed(_))));
    assert!(build_insensitivity(&f, 0.7, &cfg(), &Serial).is_err());
}

#[test]
fn insensitive_pair_with_bounded_factor() {
    let f = Distribution::regvar(2.0, 1.0).unwrap();
    let g = Distribution::uniform(0.0, 1.0).unwrap();
    let a = build_insensitivity(&f, 0.01, &cfg(), &Serial).unwrap();
    let params = ConditionParams {
        a: Some(AFunction::Table(a)),
        ..Default::default()
    };
    let r = check_condition(ConditionId::T1aD, &f, &g, &params, &cfg(), &Serial).unwrap();
    assert_eq!(r.overall, Overall::HoldsEvidence);
}

#[test]
fn verdict_for_rescaled_pareto() {
    let f = Distribution::regvar(2.0, 1.0).unwrap();
    let g = Distribution::degenerate(3.0).unwrap();
    let v = theorem11_verdict(&f, &g, &cfg(), &Serial).unwrap();
    assert_eq!(v.branch, Branch::DfEmpty);
    assert_eq!(v.predicted, Membership::Member);
    assert_eq!(v.agreement, Agreement::Agree);
    // the product is an exact rescale, so the cross-check curve is the scaled one
    let direct = classify(&f.scale(3.0).unwrap(), ClassId::S, &cfg(), &Serial).unwrap();
    assert_eq!(v.cross_check.evidence[0].diagnostic.log_ratios, direct.evidence[0].diagnostic.log_ratios);
}

#[test]
fn verdict_for_lattice_exponential() {
    let f = Distribution::lattice_power(3.0).unwrap();
    let g = Distribution::exponential(1.0).unwrap();
    let v = theorem11_verdict(&f, &g, &cfg(), &Serial).unwrap();
    assert!(matches!(v.branch, Branch::AtomCondition { .. }));
    assert_eq!(v.predicted, Membership::Member);
    assert_eq!(v.agreement, Agreement::Agree);
}

#[test]
fn verdict_refuses_light_tail() {
    let e = Distribution::exponential(1.0).unwrap();
    let g = Distribution::uniform(0.0, 1.0).unwrap();
    assert!(matches!(theorem11_verdict(&e, &g, &cfg(), &Serial), Err(crate::Error::PremiseFailed(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn window_shrinking_never_jumps_between_outcomes(
        base in -30.0f64..5.0,
        steps in proptest::collection::vec(-3.0f64..3.0, 16..24),
        req in 0usize..3,
    ) {
        let mut r = vec![base];
        for s in &steps {
            let last = *r.last().unwrap();
            r.push(last + s);
        }
        let req = [Requirement::LittleO, Requirement::BigO, Requirement::Equivalent][req];
        let xs: Vec<f64> = (0..r.len()).map(|i| i as f64 + 1.0).collect();
        let mut prev: Option<Overall> = None;
        for w in (2..=8).rev() {
            let t = Thresholds { window: w, ..Thresholds::default() };
            let d = RatioDiagnostic::from_log_ratios(xs.clone(), r.clone(), &t);
            let o = conditions::grade(req, &d, &t);
            if let Some(p) = prev {
                prop_assert!(!(p == Overall::HoldsEvidence && o == Overall::FailsEvidence));
                prop_assert!(!(p == Overall::FailsEvidence && o == Overall::HoldsEvidence));
            }
            prev = Some(o);
        }
    }

    #[test]
    fn small_steps_near_one_hold_equivalence(
        steps in proptest::collection::vec(-0.001f64..0.001, 16..24),
    ) {
        let r: Vec<f64> = steps.iter().scan(0.0, |s, d| { *s += d; Some(*s * 0.1) }).collect();
        let xs: Vec<f64> = (0..r.len()).map(|i| i as f64 + 1.0).collect();
        let d = RatioDiagnostic::from_log_ratios(xs, r, &th());
        prop_assert_eq!(conditions::grade(Requirement::Equivalent, &d, &th()), Overall::HoldsEvidence);
    }
}
