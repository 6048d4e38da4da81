mod common;

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::total_variation;
use scalar_mfe::chain::{build_chain, ergodicity_check};
use scalar_mfe::model::validate_model;
use scalar_mfe::models::{inventory_demand, ModelParams, SocialLearningParams, MODEL_NAMES};
use scalar_mfe::{ModelSpec, PopulationState, StationaryPolicy};

fn built_in(name: &str) -> ModelSpec {
    ModelParams::defaults(name).unwrap().build().unwrap()
}

/// Five points per coordinate between the bounds (a 5ᵈ grid).
fn m_grid(model: &ModelSpec) -> Vec<Vec<f64>> {
    let b = &model.bounds;
    let mut grid = vec![vec![]];
    for d in 0..b.dim() {
        grid = grid
            .into_iter()
            .flat_map(|prefix: Vec<f64>| {
                (0..5).map(move |i| {
                    let mut p = prefix.clone();
                    p.push(b.lo[d] + (b.hi[d] - b.lo[d]) * i as f64 / 4.0);
                    p
                })
            })
            .collect();
    }
    grid
}

fn point_in_bounds(model: &ModelSpec, t: f64) -> Vec<f64> {
    model.bounds.lo.iter().zip(&model.bounds.hi).map(|(l, h)| l + t * (h - l)).collect()
}

#[test]
fn every_row_sums_to_one() {
    for name in MODEL_NAMES {
        let model = built_in(name);
        for m in m_grid(&model) {
            for x in 0..model.n_states() {
                for &a in model.feasible(x) {
                    let row = model.transition_row(x, a, &m);
                    let sum: f64 = row.iter().map(|(_, p)| p).sum();
                    assert!((sum - 1.0).abs() <= 1e-12, "{name} x={x} a={a} m={m:?}: {sum}");
                    assert!(row.iter().all(|(y, p)| *p >= 0.0 && *y < model.n_states()));
                }
            }
        }
    }
}

#[test]
fn every_builder_validates() {
    for name in MODEL_NAMES {
        let report = validate_model(&built_in(name));
        assert!(report.is_empty(), "{name}: {report}");
    }
}

#[test]
fn capacity_chain_is_ergodic_on_a_policy_grid() {
    let model = built_in("capacity");
    let n = model.n_states();
    let k = model.actions.len();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut policies: Vec<Vec<usize>> = (0..k).map(|a| vec![a; n]).collect();
    policies.push((0..n).map(|x| x * (k - 1) / (n - 1)).collect());
    policies.push((0..n).map(|x| (n - 1 - x) * (k - 1) / (n - 1)).collect());
    for _ in 0..10 {
        policies.push((0..n).map(|_| rand::Rng::random_range(&mut rng, 0..k)).collect());
    }
    for m in m_grid(&model) {
        for pol in &policies {
            let g = StationaryPolicy::new(pol.clone(), m.clone());
            assert!(ergodicity_check(&build_chain(&model, &g, &m)).is_ergodic(), "m={m:?} policy={pol:?}");
        }
    }
}

#[test]
fn social_learning_rows_centre_on_the_update_mean() {
    let p = SocialLearningParams::default();
    let model = built_in("social-learning");
    let step = p.step();
    for m in m_grid(&model) {
        for x in 0..model.n_states() {
            for &a in model.feasible(x) {
                let k = SocialLearningParams::signal_weight(a as f64);
                let xv = model.states.value(x);
                let target = p.self_weight * (1.0 - k) * xv + (1.0 - p.self_weight) * (1.0 - k) * m[0] + k * p.truth;
                let mean: f64 = model.transition_row(x, a, &m).iter().map(|&(y, w)| w * model.states.value(y)).sum();
                assert!((mean - target).abs() <= step, "x={xv} a={a} m={m:?}: {mean} vs {target}");
            }
        }
    }
}

#[test]
fn ridesharing_availability_moves_deterministically() {
    let model = built_in("ridesharing");
    let width = 4;
    for m in m_grid(&model) {
        for x in 0..model.n_states() {
            for &a in model.feasible(x) {
                let row = model.transition_row(x, a, &m);
                let clocks: std::collections::BTreeSet<usize> = row.iter().filter(|(_, p)| *p > 0.0).map(|(y, _)| y / width).collect();
                assert_eq!(clocks.len(), 1, "x={x} a={a}: {row:?}");
                let mass: f64 = row.iter().map(|(_, p)| p).sum();
                assert!((mass - 1.0).abs() < 1e-12);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// 50 000 simulator draws at a fixed (x, a, m) reproduce the enumerated
    /// row within total variation 0.02.
    #[test]
    fn sampler_matches_rows(model_idx in 0usize..MODEL_NAMES.len(), xs in 0.0f64..1.0, a_pick in any::<usize>(), t in 0.0f64..=1.0, seed in any::<u64>()) {
        let model = built_in(MODEL_NAMES[model_idx]);
        let x = ((xs * model.n_states() as f64) as usize).min(model.n_states() - 1);
        let a = model.feasible(x)[a_pick % model.feasible(x).len()];
        let m = point_in_bounds(&model, t);
        let mut exact = vec![0.0; model.n_states()];
        for (y, p) in model.transition_row(x, a, &m) {
            exact[y] += p;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let draws = 50_000;
        let mut counts = vec![0.0; model.n_states()];
        for _ in 0..draws {
            counts[model.sample_transition(x, a, &m, &mut rng)] += 1.0 / draws as f64;
        }
        let tv = total_variation(&exact, &counts);
        prop_assert!(tv <= 0.02, "{} x={} a={}: TV {}", model.name, x, a, tv);
    }

    /// The interaction is a sum over (state, probability) pairs: adding the
    /// per-state contributions in any order gives the same value.
    #[test]
    fn interaction_ignores_state_order(model_idx in 0usize..MODEL_NAMES.len(), weights in prop::collection::vec(0.0f64..1.0, 1..300), t in 0.0f64..=1.0, seed in any::<u64>()) {
        let model = built_in(MODEL_NAMES[model_idx]);
        let n = model.n_states();
        let mut w: Vec<f64> = (0..n).map(|i| weights[i % weights.len()]).collect();
        w[0] += 1e-3;
        let s = PopulationState::from_weights(w).unwrap();
        let m = point_in_bounds(&model, t);
        let g = StationaryPolicy::new((0..n).map(|x| model.feasible(x)[x % model.feasible(x).len()]).collect(), m.clone());
        let whole = model.interaction_value(&s, &g, &m).unwrap().raw;

        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let mut total = vec![0.0; whole.len()];
        for x in order {
            let part = model.interaction_value(&PopulationState::point_mass(n, x), &g, &m).unwrap().raw;
            for (acc, v) in total.iter_mut().zip(part) {
                *acc += s.probs()[x] * v;
            }
        }
        for (a, b) in whole.iter().zip(&total) {
            prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()), "{}: {} vs {}", model.name, a, b);
        }
    }

    #[test]
    fn inventory_demand_is_nondecreasing_in_m(zeta in 0.0f64..10.0, m1 in 0.0f64..4.0, dm in 0.0f64..4.0, spill in 0.0f64..3.0) {
        prop_assert!(inventory_demand(zeta, m1, spill) <= inventory_demand(zeta, m1 + dm, spill));
    }
}
