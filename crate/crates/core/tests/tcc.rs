use parcone::grid::Grid;
use parcone::models::{forward_solve, CubicPreset, Linearization, ModelKind, ParamSpace};
use parcone::operators::wstar_time_norm;
use parcone::presets::{default_instance, Instance};
use parcone::random::{rng, smooth_field, smooth_trajectory};
use parcone::tcc::*;
use proptest::prelude::*;

fn l2(g: &Grid, f: &parcone::grid::Field) -> f64 {
    (g.h * f.dot(f)).sqrt()
}

#[test]
fn ten_thousand_draws_stay_in_the_ball() {
    let inst = default_instance(ModelKind::Potential);
    for seed in 0..10_000 {
        let t = sample_ball(&inst.grid, &inst.theta0, 0.5, seed, ParamSpace::L2, None).unwrap();
        assert!(l2(&inst.grid, &t.sub(&inst.theta0)) <= 0.5);
    }
}

#[test]
fn identical_pairs_are_all_skipped() {
    for kind in ModelKind::ALL {
        let inst = default_instance(kind);
        let (spec, g, ta) = (&inst.spec, &inst.grid, &inst.axis);
        let cfg = SampleConfig::new(inst.theta0.clone(), 0.5, 5, 1);
        let pairs: Vec<_> = (0..5).map(|i| cfg.sample_pair(g, spec, i).map(|(a, _)| (a.clone(), a)).unwrap()).collect();
        for rep in [
            tcc_reduced_on_pairs(spec, g, ta, &cfg, &pairs).unwrap(),
            tcc_aao_on_pairs(spec, g, ta, &cfg, &pairs).unwrap(),
        ] {
            assert_eq!(rep.retained, 0, "{} {}", kind.name(), rep.label);
            assert_eq!(rep.skipped, 5);
            assert_eq!(rep.max_ratio(), None);
        }
    }
}

#[test]
fn cubic_small_ball_has_small_constant() {
    let inst = default_instance(ModelKind::CubicSource);
    let cfg = SampleConfig::new(inst.theta0.clone(), 1e-3, 50, 2);
    let rep = tcc_estimate_reduced(&inst.spec, &inst.grid, &inst.axis, &cfg).unwrap();
    assert_eq!(rep.retained, 50);
    assert!(rep.max_ratio().unwrap() <= 0.1, "{:?}", rep.max_ratio());
}

#[test]
fn aao_numerator_matches_bilinear_closed_form() {
    for kind in [ModelKind::Potential, ModelKind::Diffusion] {
        let inst = default_instance(kind);
        let (spec, g, ta) = (&inst.spec, &inst.grid, &inst.axis);
        let cfg = SampleConfig::new(inst.theta0.clone(), 0.5, 20, 3);
        let rep = tcc_estimate_aao(spec, g, ta, &cfg).unwrap();
        for rec in &rep.pairs {
            let (a, b) = cfg.sample_pair(g, spec, rec.pair_index).unwrap();
            let u = forward_solve(spec, &a, g, ta).unwrap();
            let ut = forward_solve(spec, &b, g, ta).unwrap();
            let r = bilinear_remainder(spec, g, &a, &u, &b, &ut).unwrap();
            let direct = wstar_time_norm(g, ta.dt, &r, kind.w_kind()).unwrap();
            assert!((direct - rec.numerator).abs() <= 1e-10 * direct.max(1e-300), "{}: {direct} vs {}", kind.name(), rec.numerator);
        }
    }
}

#[test]
fn adjoint_trial_scales_linearly() {
    let inst = default_instance(ModelKind::Diffusion);
    let (spec, g, ta) = (&inst.spec, &inst.grid, &inst.axis);
    let lin = Linearization::at(spec, &inst.theta_true, g, ta).unwrap();
    let mut r = rng(1);
    let h = smooth_field(g, &mut r);
    let w = smooth_trajectory(g, ta, &mut r);
    let one = adjoint_trial(&lin, &h, &w).unwrap();
    let two = adjoint_trial(&lin, &h.scale(2.0), &w).unwrap();
    assert!((two.lhs - 2.0 * one.lhs).abs() <= 1e-13 * one.lhs.abs());
    assert!((two.rhs - 2.0 * one.rhs).abs() <= 1e-13 * one.rhs.abs());
    assert!((two.gap - one.gap).abs() <= 1e-15);
    let zero = adjoint_trial(&lin, &g.zeros(), &w).unwrap();
    assert_eq!((zero.lhs, zero.rhs), (0.0, 0.0));
}

#[test]
fn adjoint_test_reports_every_model() {
    for kind in ModelKind::ALL {
        let inst = default_instance(kind);
        let rep = adjoint_test(&inst.spec, &inst.grid, &inst.axis, &inst.theta_true, 4, 0).unwrap();
        assert_eq!(rep.trials.len(), 4);
        assert!(rep.max_gap <= 1e-10);
    }
}

#[test]
fn taylor_remainders() {
    let inst = default_instance(ModelKind::Potential);
    let (g, ta) = (&inst.grid, &inst.axis);
    let ts = [1e-1, 1e-2, 1e-3];
    let rows = taylor_test(&inst.spec, g, ta, &inst.theta_true, &g.zeros(), &ts).unwrap();
    assert!(rows.iter().all(|r| r.remainder == 0.0 && r.order.is_none()));

    // with Φ = 0 the cubic model is affine in θ, so the remainder is roundoff
    let mut spec = default_instance(ModelKind::CubicSource).spec;
    spec.cubic = CubicPreset { alpha: 0.0, beta: 0.0, gamma0: 0.0 };
    let h = smooth_field(g, &mut rng(2));
    let rows = taylor_test(&spec, g, ta, &inst.theta_true, &h, &ts).unwrap();
    assert!(rows.iter().all(|r| r.remainder <= 1e-13), "{rows:?}");

    assert!(taylor_test(&inst.spec, g, ta, &inst.theta_true, &h, &[1e-1, 1e-2]).is_err());
    assert!(taylor_test(&inst.spec, g, ta, &inst.theta_true, &h, &[1e-2, 1e-1, 1e-3]).is_err());
}

#[test]
fn raising_the_floor_tenfold_barely_moves_the_constant() {
    let inst = default_instance(ModelKind::Potential);
    let (spec, g, ta) = (&inst.spec, &inst.grid, &inst.axis);
    let base = SampleConfig::new(inst.theta0.clone(), 0.5, 200, 0);
    let rep = tcc_estimate_reduced(spec, g, ta, &base).unwrap();
    let floor = rep.provenance.denominator_floor;
    let raised = SampleConfig {
        denominator_floor: Some(10.0 * floor),
        ..base
    };
    let rep10 = tcc_estimate_reduced(spec, g, ta, &raised).unwrap();
    let (a, b) = (rep.max_ratio().unwrap(), rep10.max_ratio().unwrap());
    assert!((a - b).abs() <= 0.05 * a, "{a} vs {b}");
}

#[test]
fn stability_constant_bounds_reduced_by_aao_per_pair() {
    let inst: Instance = default_instance(ModelKind::Potential);
    let (spec, g, ta) = (&inst.spec, &inst.grid, &inst.axis);
    let cfg = SampleConfig::new(inst.theta0.clone(), 0.5, 10, 5);
    let pairs: Vec<_> = (0..10).map(|i| cfg.sample_pair(g, spec, i).unwrap()).collect();
    let re = tcc_reduced_on_pairs(spec, g, ta, &cfg, &pairs).unwrap();
    let aao = tcc_aao_on_pairs(spec, g, ta, &cfg, &pairs).unwrap();
    for (i, (a, _)) in pairs.iter().enumerate() {
        let lin = Linearization::at(spec, a, g, ta).unwrap();
        let c = linearized_stability_constant(&lin, spec.kind.w_kind(), 40, 0).unwrap();
        let (r, s) = (re.pairs[i].ratio.unwrap(), aao.pairs[i].ratio.unwrap());
        assert!(r <= 1.05 * c * s, "pair {i}: {r} > {c} * {s}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn report_invariants(seed in 0u64..1_000, rho in 0.01f64..1.0, kind_ix in 0usize..4) {
        let kind = ModelKind::ALL[kind_ix];
        let inst = default_instance(kind);
        let rho = if kind == ModelKind::QuadraticGradientSource { rho * 0.2 } else { rho };
        let cfg = SampleConfig::new(inst.theta0.clone(), rho, 6, seed);
        let rep = tcc_estimate_reduced(&inst.spec, &inst.grid, &inst.axis, &cfg).unwrap();
        prop_assert_eq!(rep.retained + rep.skipped + rep.failed, rep.attempted);
        prop_assert!(rep.summary.ratios.iter().all(|r| r.is_finite() && *r >= 0.0));
        let again = tcc_estimate_reduced(&inst.spec, &inst.grid, &inst.axis, &cfg).unwrap();
        prop_assert_eq!(rep, again);
    }

    #[test]
    fn samples_lie_in_the_ball(seed in any::<u64>(), rho in 1e-6f64..2.0) {
        let inst = default_instance(ModelKind::Diffusion);
        let t = sample_ball(&inst.grid, &inst.theta0, rho, seed, ParamSpace::L2, Some(inst.spec.a_lower)).unwrap();
        prop_assert!(l2(&inst.grid, &t.sub(&inst.theta0)) <= rho);
        prop_assert!(t.min() >= inst.spec.a_lower);
    }
}
