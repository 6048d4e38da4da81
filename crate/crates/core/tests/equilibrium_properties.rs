mod common;

use std::collections::HashMap;

use proptest::prelude::*;

use common::{broyden_affine, noisy_bisection};
use scalar_mfe::equilibrium::{adaptive_vfi, broyden_solve, certify, residual, BroydenConfig, SolverConfig, Termination};
use scalar_mfe::learning::{adaptive_q_learning, LearningConfig};
use scalar_mfe::models::{
    CapacityParams, InventoryParams, ModelParams, ReputationParams, RidesharingParams, SocialLearningParams, MODEL_NAMES,
};
use scalar_mfe::{MfeSolution, ModelSpec};

/// Every check of the certificate passes, or the solution admits it did
/// not converge.
fn assert_certified(model: &ModelSpec, sol: &MfeSolution, cfg: &SolverConfig) {
    if !sol.converged {
        assert!(sol.residual > cfg.residual_tol, "{}: unconverged flag with |f| = {}", model.name, sol.residual);
        return;
    }
    let cert = certify(model, sol, cfg).unwrap();
    for c in &cert.checks {
        assert!(c.passed, "{} at m* = {:?}: {} failed ({} > {}) {}", model.name, sol.m_star, c.name, c.value, c.tolerance, c.detail);
    }
}

#[test]
fn built_in_vfi_solutions_certify() {
    let cfg = SolverConfig::default();
    for name in MODEL_NAMES.iter().filter(|n| **n != "capacity-2d") {
        let model = ModelParams::defaults(name).unwrap().build().unwrap();
        let sol = adaptive_vfi(&model, &cfg).unwrap();
        assert_certified(&model, &sol, &cfg);
    }
}

#[test]
fn two_dimensional_broyden_solution_certifies() {
    let cfg = SolverConfig::default();
    let model = ModelParams::defaults("capacity-2d").unwrap().build().unwrap();
    let sol = broyden_solve(&model, &cfg, &BroydenConfig::default()).unwrap();
    assert_certified(&model, &sol, &cfg);
}

/// `f(lo_t) ≤ 0 ≤ f(hi_t)` along the trace, and each bracket is half the
/// previous one.
fn check_bracket(model: &ModelSpec) {
    let cfg = SolverConfig::default();
    let sol = adaptive_vfi(model, &cfg).unwrap();
    let mut cache: HashMap<u64, f64> = HashMap::new();
    let mut f = |m: f64| *cache.entry(m.to_bits()).or_insert_with(|| residual(model, &[m], &cfg).unwrap().f[0]);
    for (i, t) in sol.trace.iter().enumerate() {
        let (lo, hi) = (t.lo.unwrap(), t.hi.unwrap());
        assert!(f(lo) <= 1e-12 && f(hi) >= -1e-12, "{}: step {i} bracket [{lo}, {hi}] loses the sign change", model.name);
        if i > 0 {
            let prev = sol.trace[i - 1].hi.unwrap() - sol.trace[i - 1].lo.unwrap();
            // Exact up to the rounding of the midpoint.
            let ulps = 4.0 * f64::EPSILON * lo.abs().max(hi.abs());
            assert!((hi - lo - prev / 2.0).abs() <= ulps, "{}: width does not halve at step {i}", model.name);
        }
    }
}

#[test]
fn bisection_keeps_a_sign_change_and_halves() {
    for name in ["two-state-toy", "capacity", "ridesharing", "inventory", "social-learning"] {
        check_bracket(&ModelParams::defaults(name).unwrap().build().unwrap());
    }
}

#[test]
fn identical_runs_have_identical_traces() {
    let cfg = SolverConfig::default();
    let model = ModelParams::defaults("capacity").unwrap().build().unwrap();
    let a = adaptive_vfi(&model, &cfg).unwrap();
    let b = adaptive_vfi(&model, &cfg).unwrap();
    assert_eq!(a.trace, b.trace);
    assert_eq!(a.population, b.population);

    let toy = ModelParams::defaults("ridesharing").unwrap().build().unwrap();
    let lcfg = LearningConfig { horizon: 5_000, mc_samples: 10_000, seed: 9, ..Default::default() };
    let q1 = adaptive_q_learning(&toy.sample_view(), &cfg, &lcfg).unwrap();
    let q2 = adaptive_q_learning(&toy.sample_view(), &cfg, &lcfg).unwrap();
    assert_eq!(q1.solution.trace, q2.solution.trace);
    assert_eq!(q1.q_table.q.iter().flatten().map(|v| v.to_bits()).collect::<Vec<_>>(), q2.q_table.q.iter().flatten().map(|v| v.to_bits()).collect::<Vec<_>>());
}

fn model_variant() -> impl Strategy<Value = ModelParams> {
    prop_oneof![
        (30.0f64..60.0, 0.85f64..0.99).prop_map(|(alpha, discount)| ModelParams::Capacity(CapacityParams { alpha, discount, ..Default::default() })),
        (0.0f64..12.0, 0.3f64..1.0).prop_map(|(holding_cost, revenue_share)| ModelParams::Inventory(InventoryParams {
            holding_cost,
            revenue_share,
            ..Default::default()
        })),
        (2.0f64..15.0).prop_map(|r_long| ModelParams::Ridesharing(RidesharingParams { r_long, ..Default::default() })),
        (1.0f64..20.0).prop_map(|precision| ModelParams::SocialLearning(SocialLearningParams { precision, ..Default::default() })),
        (0.05f64..0.6).prop_map(|effort_cost| ModelParams::Reputation(ReputationParams { effort_cost, ..Default::default() })),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn every_vfi_solution_certifies_or_is_flagged(params in model_variant()) {
        let cfg = SolverConfig::default();
        let model = params.build().unwrap();
        let sol = adaptive_vfi(&model, &cfg).unwrap();
        assert_certified(&model, &sol, &cfg);
        if sol.converged {
            prop_assert_eq!(sol.termination, Termination::ResidualTolerance);
        }
    }

    /// Noise strictly inside the dead zone never loses the root.
    #[test]
    fn dead_zone_bisection_survives_bounded_noise(root in 0.0f64..1.0, delta in 1e-6f64..0.05, seed in any::<u64>()) {
        if let Err(e) = noisy_bisection(root, delta, 1e-9, seed) {
            prop_assert!(false, "{}", e);
        }
    }

    /// Good Broyden is exact on affine maps within 2n steps.
    #[test]
    fn broyden_solves_affine_maps_within_2n(n in 1usize..=4, seed in any::<u64>()) {
        let iters = broyden_affine(n, seed, 1e-8, 50);
        prop_assert!(matches!(iters, Some(k) if k <= 2 * n), "n = {}: {:?}", n, iters);
    }

    /// The n + 2 bound as stated for the solver.
    #[test]
    fn broyden_solves_affine_maps_within_dim_plus_2(n in 1usize..=4, seed in any::<u64>()) {
        let iters = broyden_affine(n, seed, 1e-8, 50);
        prop_assert!(matches!(iters, Some(k) if k <= n + 2), "n = {}: {:?}", n, iters);
    }
}
