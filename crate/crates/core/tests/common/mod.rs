//! Oracles and random instances shared by the property and acceptance
//! suites.
#![allow(dead_code)]

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use scalar_mfe::chain::{build_chain, monte_carlo_stationary, stationary_distribution};
use scalar_mfe::dp::{self, q_values, value_iteration};
use scalar_mfe::equilibrium::{bisect, broyden, BracketStep};
use scalar_mfe::learning::{q_learning, simplex_projection, LearningConfig, LearningRate};
use scalar_mfe::model::{ActionSpace, Dynamics, ModelSpec, PopulationState, ScalarBounds, SparseRow, StateSpace, StationaryPolicy};

/// Finite MDP with tabulated payoffs and dense transition rows; the
/// interaction is the population mean of the state index.
pub struct TableMdp {
    pub payoff: Vec<Vec<f64>>,
    pub rows: Vec<Vec<SparseRow>>,
}

impl Dynamics for TableMdp {
    fn payoff(&self, x: usize, a: usize, _: &[f64]) -> f64 {
        self.payoff[x][a]
    }
    fn transition_row(&self, x: usize, a: usize, _: &[f64]) -> SparseRow {
        self.rows[x][a].clone()
    }
    fn interaction(&self, s: &PopulationState, _: &StationaryPolicy, _: &[f64]) -> Vec<f64> {
        vec![s.probs().iter().enumerate().map(|(i, p)| i as f64 * p).sum()]
    }
}

/// Random MDP: payoffs in [0, 1), every row strictly positive on a random
/// support that always contains the next state (so every chain is
/// irreducible and aperiodic).
pub fn random_mdp(n: usize, k: usize, beta: f64, seed: u64) -> ModelSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let payoff = (0..n).map(|_| (0..k).map(|_| rng.random::<f64>()).collect()).collect();
    let rows = (0..n)
        .map(|x| {
            (0..k)
                .map(|_| {
                    let mut w: Vec<f64> = (0..n).map(|_| if rng.random::<f64>() < 0.5 { rng.random::<f64>() } else { 0.0 }).collect();
                    w[(x + 1) % n] += 0.1 + rng.random::<f64>();
                    w[x] += 0.1 * rng.random::<f64>() + 0.01;
                    let total: f64 = w.iter().sum();
                    w.iter().enumerate().filter(|(_, v)| **v > 0.0).map(|(y, v)| (y, v / total)).collect()
                })
                .collect()
        })
        .collect();
    ModelSpec::new(
        "random-mdp",
        StateSpace::indexed(n).unwrap(),
        ActionSpace::unrestricted((0..k).map(|a| a as f64).collect(), n),
        beta,
        ScalarBounds::scalar(0.0, n.max(2) as f64 - 1.0).unwrap(),
        Arc::new(TableMdp { payoff, rows }),
    )
    .unwrap()
}

pub fn sup_norm(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn total_variation(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

fn backup(model: &ModelSpec, v: &[f64]) -> Vec<f64> {
    let table = dp::ValueTable { values: v.to_vec(), ..dp::ValueTable::zeros(v.len(), &[0.0]) };
    dp::bellman_backup(model, &table, &[0.0]).values
}

/// ‖TV₁ − TV₂‖∞ ≤ β‖V₁ − V₂‖∞, and V₁ ≤ V₂ ⇒ TV₁ ≤ TV₂.
pub fn check_bellman(model: &ModelSpec, v1: &[f64], v2: &[f64]) -> Result<(), String> {
    let (t1, t2) = (backup(model, v1), backup(model, v2));
    let lhs = sup_norm(&t1, &t2);
    let rhs = model.discount * sup_norm(v1, v2);
    if lhs > rhs + 1e-9 {
        return Err(format!("contraction: {lhs} > {rhs}"));
    }
    let lo: Vec<f64> = v1.iter().zip(v2).map(|(a, b)| a.min(*b)).collect();
    let hi: Vec<f64> = v1.iter().zip(v2).map(|(a, b)| a.max(*b)).collect();
    let (tl, th) = (backup(model, &lo), backup(model, &hi));
    if let Some(x) = (0..tl.len()).find(|&x| tl[x] > th[x] + 1e-12) {
        return Err(format!("monotonicity broken in state {x}: {} > {}", tl[x], th[x]));
    }
    Ok(())
}

/// The projection lies on the simplex, has the thresholded form
/// `max(v − τ, 0)`, and is no farther from `v` than any probe point.
pub fn check_simplex(v: &[f64], probes: &[Vec<f64>]) -> Result<(), String> {
    let p = simplex_projection(v);
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > 1e-9 || p.iter().any(|x| *x < 0.0) {
        return Err(format!("not on the simplex: {p:?}"));
    }
    let support: Vec<usize> = (0..p.len()).filter(|&i| p[i] > 0.0).collect();
    let tau = v[support[0]] - p[support[0]];
    for i in 0..p.len() {
        let expect = (v[i] - tau).max(0.0);
        if (p[i] - expect).abs() > 1e-9 {
            return Err(format!("coordinate {i}: {} vs thresholded {expect}", p[i]));
        }
    }
    let d2 = |q: &[f64]| v.iter().zip(q).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
    let dp = d2(&p);
    for q in probes {
        let total: f64 = q.iter().sum();
        let q: Vec<f64> = q.iter().map(|x| x / total).collect();
        if d2(&q) < dp - 1e-12 {
            return Err(format!("probe {q:?} is closer than the projection"));
        }
    }
    Ok(())
}

/// TV distance between the Monte Carlo estimate (K steps) and the exact
/// invariant law, under a random deterministic policy.
pub fn mc_vs_exact_tv(model: &ModelSpec, policy_seed: u64, k: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(policy_seed);
    let n = model.n_states();
    let g = StationaryPolicy::new((0..n).map(|x| model.feasible(x)[rng.random_range(0..model.feasible(x).len())]).collect(), vec![0.0]);
    let exact = stationary_distribution(&build_chain(model, &g, &[0.0])).expect("irreducible");
    let mc = monte_carlo_stationary(&model.sample_view(), &g, &[0.0], k, seed, 0, 0);
    total_variation(exact.probs(), mc.probs())
}

/// Q-learning configuration with diminishing rates used for the accuracy
/// checks against the dynamic-programming oracle.
pub fn convergent_learning(horizon: usize) -> LearningConfig {
    LearningConfig {
        horizon,
        learning_rate: LearningRate::RobbinsMonro { scale: 1.0, exponent: 0.7 },
        episode_length: 50,
        ..Default::default()
    }
}

/// ‖Q̂ − Q*‖∞ over feasible pairs.
pub fn q_learning_gap(model: &ModelSpec, cfg: &LearningConfig, seed: u64) -> f64 {
    let v = value_iteration(model, &[0.0], 1e-12, 100_000);
    let exact = q_values(model, &v.values, &[0.0]);
    let learned = q_learning(&model.sample_view(), &[0.0], cfg, seed);
    let mut gap: f64 = 0.0;
    for x in 0..model.n_states() {
        for &a in model.feasible(x) {
            gap = gap.max((learned.q[x][a] - exact[x][a]).abs());
        }
    }
    gap
}

/// Broyden on `f(m) = A(m − r)` with a random well-conditioned `A`;
/// returns the iteration count at which `‖f‖ < tol` (None if never).
pub fn broyden_affine(n: usize, seed: u64, tol: f64, max_iters: usize) -> Option<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.5 + rng.random::<f64>() } else { rng.random::<f64>() - 0.5 }).collect())
        .collect();
    let r: Vec<f64> = (0..n).map(|_| 4.0 * rng.random::<f64>() - 2.0).collect();
    let m0: Vec<f64> = (0..n).map(|_| 4.0 * rng.random::<f64>() - 2.0).collect();
    let f = |m: &[f64]| -> Result<Vec<f64>, ()> {
        Ok(a.iter().map(|row| row.iter().zip(m).zip(&r).map(|((aij, mj), rj)| aij * (mj - rj)).sum()).collect())
    };
    let big = vec![1e6; n];
    let neg: Vec<f64> = big.iter().map(|v| -v).collect();
    let out = broyden(f, &m0, &neg, &big, tol, max_iters).unwrap();
    out.converged.then_some(out.iterations)
}

/// Dead-zone bisection on `m − root` with bounded noise `|ξ| < δ` added to
/// every evaluation. Returns the step log; the root must stay bracketed.
pub fn noisy_bisection(root: f64, delta: f64, eps: f64, seed: u64) -> Result<Vec<BracketStep>, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let out = bisect(0.0, 1.0, delta, eps, 200, |_, m| Ok::<f64, ()>(m - root + delta * (2.0 * rng.random::<f64>() - 1.0) * 0.999))
        .map_err(|_| "evaluation failed".to_string())?;
    let mut prev = (0.0, 1.0);
    for s in &out.steps {
        if !(s.lo <= root && root <= s.hi) {
            return Err(format!("root {root} left [{}, {}] at iteration {}", s.lo, s.hi, s.iteration));
        }
        if s.lo < prev.0 || s.hi > prev.1 {
            return Err("bracket grew".into());
        }
        prev = (s.lo, s.hi);
    }
    let last = out.last();
    if last.f.abs() <= delta {
        // Accepted point: true residual is below 2δ.
        if (last.m - root).abs() >= 2.0 * delta {
            return Err(format!("accepted m = {} with true residual {}", last.m, last.m - root));
        }
    } else {
        let (lo, hi) = if last.f > delta { (last.lo, last.m) } else { (last.m, last.hi) };
        if !(lo <= root && root <= hi) {
            return Err(format!("root {root} left the final bracket [{lo}, {hi}]"));
        }
    }
    Ok(out.steps)
}
