use super::*;
use crate::exec::Serial;
use proptest::prelude::*;

fn q() -> QuadratureSpec {
    QuadratureSpec::default()
}

fn pareto_uniform() -> RiskModel {
    RiskModel::new(
        Distribution::regvar(1.0, 1.0).unwrap(),
        Distribution::uniform(0.0, 1.0).unwrap(),
        Horizon::Finite { n: 3 },
    )
    .unwrap()
}

fn unit_discount(z: Distribution) -> RiskModel {
    RiskModel::new(z, Distribution::degenerate(1.0).unwrap(), Horizon::Finite { n: 4 }).unwrap()
}

#[test]
fn discount_must_be_positive() {
    let z = Distribution::regvar(1.0, 1.0).unwrap();
    assert!(RiskModel::new(z.clone(), Distribution::uniform(-1.0, 1.0).unwrap(), Horizon::Infinite).is_err());
    assert!(RiskModel::new(z.clone(), Distribution::degenerate(0.0).unwrap(), Horizon::Infinite).is_err());
    assert!(RiskModel::new(z, Distribution::degenerate(1.0).unwrap(), Horizon::Finite { n: 0 }).is_err());
}

#[test]
fn unit_discount_tail_is_loss_tail() {
    let m = unit_discount(Distribution::regvar(1.5, 1.0).unwrap());
    for i in 1..=4 {
        let v = discounted_loss_tail(&m, i, 30.0, &ProductGridSpec::default(), &q(), &Serial).unwrap();
        assert!((v.ln() - m.f.ln_sf(30.0)).abs() < 1e-12, "i={i}");
    }
}

#[test]
fn pareto_uniform_tails_halve() {
    let m = pareto_uniform();
    let laws = DiscountLaws::build(&m.y, 6, &ProductGridSpec::default(), &q(), &Serial).unwrap();
    for &x in &[1.0, 5.0, 50.0, 1e4] {
        let t = discounted_loss_tails(&m, &laws, x, &q()).unwrap();
        for (k, v) in t.iter().enumerate() {
            let want = 0.5f64.powi(k as i32 + 1) / x;
            assert!(crate::math::rel_diff(v.prob(), want) < 1e-6, "i={} x={x}: {} vs {want}", k + 1, v.prob());
        }
    }
}

#[test]
fn first_tail_is_plain_product() {
    let m = pareto_uniform();
    let a = discounted_loss_tail(&m, 1, 7.0, &ProductGridSpec::default(), &q(), &Serial).unwrap();
    let b = product_tail(&m.f, &m.y, 7.0, &q()).unwrap();
    assert!((a.ln() - b.ln()).abs() < 1e-12);
}

#[test]
fn asymptotic_sum() {
    let m = pareto_uniform();
    let v = finite_ruin_asymptotic(&m, 3, 50.0, &ProductGridSpec::default(), &q(), &Serial).unwrap();
    assert!((v.ln() - 0.0175f64.ln()).abs() < 1e-6, "{}", v.prob());
    let one = finite_ruin_asymptotic(&m, 1, 50.0, &ProductGridSpec::default(), &q(), &Serial).unwrap();
    let h1 = product_tail(&m.f, &m.y, 50.0, &q()).unwrap();
    assert!((one.ln() - h1.ln()).abs() < 1e-12);
}

#[test]
fn asymptotic_unit_discount_is_n_times_tail() {
    let m = unit_discount(Distribution::weibull_type(0.5).unwrap());
    for &x in &[2.0, 40.0, 1e3] {
        let v = finite_ruin_asymptotic(&m, 4, x, &ProductGridSpec::default(), &q(), &Serial).unwrap();
        assert!((v.ln() - (4.0f64.ln() + m.f.ln_sf(x))).abs() < 1e-12);
    }
}

#[test]
fn report_embeds_checks() {
    let m = pareto_uniform();
    let r = finite_ruin_asymptotic_report(&m, 3, 50.0, &DiagConfig::default(), &Serial).unwrap();
    assert!((r.value.ln() - 0.0175f64.ln()).abs() < 1e-6);
    assert_eq!(r.terms.len(), 3);
    assert!(r.domination.is_some() || !r.notes.is_empty());
    assert!(r.closure.is_some() || !r.notes.is_empty());
}

#[test]
fn mc_deterministic_walk() {
    let m = RiskModel::new(
        Distribution::degenerate(1.0).unwrap(),
        Distribution::degenerate(1.0).unwrap(),
        Horizon::Finite { n: 5 },
    )
    .unwrap();
    for &(x, want) in &[(4.5, 1.0), (5.0, 0.0), (0.5, 1.0), (7.0, 0.0)] {
        let r = finite_ruin_mc(&m, 5, x, 10_000, 1, &Serial).unwrap();
        assert_eq!(r.point, want, "x={x}");
    }
}

#[test]
fn mc_single_step_matches_tail() {
    let m = pareto_uniform();
    let x = 5.0;
    let r = finite_ruin_mc(&m, 1, x, 200_000, 11, &Serial).unwrap();
    let h1 = product_tail(&m.f, &m.y, x, &q()).unwrap().prob();
    assert!((r.point - h1).abs() < 1.5 * r.ci_halfwidth, "{} vs {h1}", r.point);
    assert_eq!(r.point, r.terminal_point);
}

#[test]
fn mc_three_steps_near_asymptotic() {
    let m = pareto_uniform();
    let r = finite_ruin_mc(&m, 3, 50.0, 1_000_000, 3, &Serial).unwrap();
    let ratio = r.point / 0.0175;
    assert!((0.9..=1.1).contains(&ratio), "{ratio}");
}

#[test]
fn mc_rejects_bad_args() {
    let m = pareto_uniform();
    assert!(finite_ruin_mc(&m, 0, 1.0, 10_000, 0, &Serial).is_err());
    assert!(finite_ruin_mc(&m, 1, 1.0, 9_999, 0, &Serial).is_err());
    assert!(finite_ruin_mc(&m, 1, f64::NAN, 10_000, 0, &Serial).is_err());
}

#[test]
fn mc_negative_losses_lower_ruin() {
    // Z = X - 1 never exceeds the ruin probability of X itself
    let x_law = Distribution::regvar(1.0, 1.0).unwrap();
    let y = Distribution::uniform(0.0, 1.0).unwrap();
    let a = RiskModel::new(x_law.clone(), y.clone(), Horizon::Finite { n: 4 }).unwrap();
    let b = RiskModel::new(x_law.shift(-1.0).unwrap(), y, Horizon::Finite { n: 4 }).unwrap();
    let ra = finite_ruin_mc(&a, 4, 3.0, 50_000, 5, &Serial).unwrap();
    let rb = finite_ruin_mc(&b, 4, 3.0, 50_000, 5, &Serial).unwrap();
    assert!(rb.point <= ra.point);
}

#[test]
fn mc_grid_monotone_pathwise() {
    let m = RiskModel::new(
        Distribution::regvar(1.2, 1.0).unwrap().shift(-1.5).unwrap(),
        Distribution::uniform(0.2, 1.3).unwrap(),
        Horizon::Finite { n: 6 },
    )
    .unwrap();
    let xs = [0.5, 1.0, 2.0, 5.0, 20.0];
    for seed in 0..3 {
        let g = finite_ruin_mc_grid(&m, 6, &xs, 20_000, seed, &Serial).unwrap();
        for k in 0..6 {
            for j in 0..xs.len() {
                let r = g[k][j];
                assert!(r.terminal_point <= r.point);
                assert!((0.0..=1.0).contains(&r.point) && r.ci_halfwidth >= 0.0);
                if k > 0 {
                    assert!(g[k - 1][j].point <= r.point);
                }
                if j > 0 {
                    assert!(g[k][j - 1].point >= r.point);
                }
            }
        }
    }
}

#[test]
fn mc_same_seed_same_answer() {
    let m = pareto_uniform();
    let a = finite_ruin_mc(&m, 3, 10.0, 30_000, 42, &Serial).unwrap();
    let b = finite_ruin_mc(&m, 3, 10.0, 30_000, 42, &Serial).unwrap();
    assert_eq!(a, b);
    let c = finite_ruin_mc(&m, 3, 10.0, 30_000, 43, &Serial).unwrap();
    assert_ne!(a.point, c.point);
}

#[test]
fn guard_cases() {
    let z = Distribution::regvar(1.0, 1.0).unwrap();
    let g = |y: Distribution| divergence_guard(&RiskModel::new(z.clone(), y, Horizon::Infinite).unwrap());
    let r = g(Distribution::uniform(1.0, 2.0).unwrap());
    assert!(!r.pass && r.reason.contains("infinity"));
    assert!(g(Distribution::uniform(0.0, 1.0).unwrap()).pass);
    assert!(!g(Distribution::degenerate(1.0).unwrap()).pass);
    assert!(g(Distribution::degenerate(0.5).unwrap()).pass);
}

#[test]
fn lower_bound_fixture() {
    let m = pareto_uniform();
    let x = 50.0;
    let r = infinite_lower_bound(&m, x, &LowerBoundOptions::default(), &DiagConfig::default(), &Serial).unwrap();
    assert!((r.a - 0.5).abs() < 1e-9, "{}", r.a);
    assert!((r.p - 0.5).abs() < 1e-12 && (r.q - 0.5).abs() < 1e-12);
    assert!((r.factor - 0.775).abs() < 1e-9);
    assert!(crate::math::rel_diff(r.series.prob(), 1.0 / x) < 1e-6, "{}", r.series.prob() * x);
    assert!(r.remainder_fraction < 0.01);
    // oracle: smallest m with 0.775^m / 0.225 * 2^-1 < 0.01 (1 - 2^-m)
    let mut want = 1;
    while 0.775f64.powi(want) / 0.225 * 0.5 >= 0.01 * (1.0 - 0.5f64.powi(want)) {
        want += 1;
    }
    assert_eq!(r.i_star, want as usize);
    assert!(!r.checks.is_empty());
    assert!(r.checks.iter().all(|c| c.holds && c.x >= 10.0 * 0.99), "{:?}", r.checks.iter().find(|c| !c.holds));
    assert!(r.checks.iter().all(|c| (c.ln_ratio - 0.5f64.ln()).abs() < 1e-5));
}

#[test]
fn lower_bound_atom_discount() {
    let m = RiskModel::new(
        Distribution::regvar(1.0, 1.0).unwrap(),
        Distribution::degenerate(0.5).unwrap(),
        Horizon::Infinite,
    )
    .unwrap();
    let opts = LowerBoundOptions {
        check_terms: 3,
        ..Default::default()
    };
    let r = infinite_lower_bound(&m, 50.0, &opts, &DiagConfig::default(), &Serial).unwrap();
    assert_eq!(r.p, 1.0);
    assert_eq!(r.q, 0.0);
    assert!((r.factor - (r.a + 0.05)).abs() < 1e-12);
}

#[test]
fn lower_bound_refusals() {
    let cfg = DiagConfig::default();
    let z = Distribution::regvar(1.0, 1.0).unwrap();
    let div = RiskModel::new(z.clone(), Distribution::uniform(1.0, 2.0).unwrap(), Horizon::Infinite).unwrap();
    assert!(matches!(
        infinite_lower_bound(&div, 50.0, &LowerBoundOptions::default(), &cfg, &Serial),
        Err(Error::Divergent(_))
    ));
    let wide = RiskModel::new(z.clone(), Distribution::uniform(0.5, 1.5).unwrap(), Horizon::Infinite).unwrap();
    assert!(infinite_lower_bound(&wide, 50.0, &LowerBoundOptions::default(), &cfg, &Serial).is_err());
    let light = RiskModel::new(
        Distribution::exponential(1.0).unwrap(),
        Distribution::uniform(0.0, 1.0).unwrap(),
        Horizon::Infinite,
    )
    .unwrap();
    assert!(matches!(
        infinite_lower_bound(&light, 5.0, &LowerBoundOptions::default(), &cfg, &Serial),
        Err(Error::PremiseFailed(_))
    ));
    let m = pareto_uniform();
    let bad_eps = LowerBoundOptions {
        epsilon: 0.6,
        ..Default::default()
    };
    assert!(infinite_lower_bound(&m, 50.0, &bad_eps, &cfg, &Serial).is_err());
    // Y rarely below 1/λ: factor pa + pε + q is close to 1 but below it;
    // an atom at 1 makes p = 0 and the bound vacuous
    let near_one = RiskModel::new(z, Distribution::uniform(0.6, 1.0).unwrap(), Horizon::Infinite).unwrap();
    assert!(matches!(
        infinite_lower_bound(&near_one, 50.0, &LowerBoundOptions::default(), &cfg, &Serial),
        Err(Error::VacuousBound { .. })
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn unit_discount_sum_exact(beta in 0.5f64..3.0, x in 1.0f64..1e4, n in 1usize..6) {
        let m = unit_discount(Distribution::regvar(beta, 1.0).unwrap());
        let v = finite_ruin_asymptotic(&m, n, x, &ProductGridSpec::default(), &q(), &Serial).unwrap();
        prop_assert!((v.ln() - ((n as f64).ln() + m.f.ln_sf(x))).abs() < 1e-12);
    }

    #[test]
    fn ruin_dominates_terminal(seed in 0u64..1000, x in 0.1f64..20.0) {
        let m = RiskModel::new(
            Distribution::regvar(1.0, 1.0).unwrap().shift(-2.0).unwrap(),
            Distribution::uniform(0.0, 1.2).unwrap(),
            Horizon::Finite { n: 5 },
        ).unwrap();
        let r = finite_ruin_mc(&m, 5, x, 10_000, seed, &Serial).unwrap();
        prop_assert!(r.terminal_point <= r.point);
    }
}
