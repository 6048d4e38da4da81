use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::simplex_projection;
use crate::model::{ModelSpec, SampleView, StationaryPolicy};
use crate::seed;

/// Stochastic policy stored directly as per-state probabilities over the
/// feasible actions (in the order of the feasible set).
#[derive(Debug, Clone, PartialEq)]
pub struct DirectPolicy {
    pub feasible: Vec<Vec<usize>>,
    pub probs: Vec<Vec<f64>>,
}

impl DirectPolicy {
    pub fn uniform(feasible: Vec<Vec<usize>>) -> Self {
        let probs = feasible.iter().map(|f| vec![1.0 / f.len() as f64; f.len()]).collect();
        Self { feasible, probs }
    }

    /// Highest-probability action, ties to the lowest index.
    pub fn mode(&self, interaction: &[f64]) -> StationaryPolicy {
        let action_of = self
            .probs
            .iter()
            .zip(&self.feasible)
            .map(|(p, f)| {
                let mut best = 0;
                for i in 1..p.len() {
                    if p[i] > p[best] {
                        best = i;
                    }
                }
                f[best]
            })
            .collect();
        StationaryPolicy::new(action_of, interaction.to_vec())
    }

    pub fn prob(&self, x: usize, a: usize) -> f64 {
        self.feasible[x].iter().position(|&b| b == a).map(|i| self.probs[x][i]).unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GradientMode {
    /// Gradient from the policy-gradient identity with the model's
    /// transition rows (model-based).
    Exact,
    /// Monte Carlo estimate of `Q^σ(x, a)` from the simulator, uniform state
    /// weighting (model-free).
    Sampled { rollouts: usize, horizon: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicyGradientConfig {
    pub steps: usize,
    pub rate: f64,
    pub mode: GradientMode,
}

impl Default for PolicyGradientConfig {
    fn default() -> Self {
        Self { steps: 500, rate: 0.1, mode: GradientMode::Exact }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyGradientResult {
    pub policy: DirectPolicy,
    /// `V^σ` per state (exact mode) or its Monte Carlo estimate.
    pub values: Vec<f64>,
    /// `ρᵀV^σ` with ρ uniform.
    pub objective: f64,
}

/// Exact evaluation of a stochastic policy: `V = (I − βP_σ)⁻¹ r_σ`, the
/// action values `Q = r + βPV`, and the discounted visitation weights
/// `y = (I − βP_σ)⁻ᵀ ρ` for the uniform start law ρ.
pub fn policy_evaluation(model: &ModelSpec, sigma: &DirectPolicy, m: &[f64]) -> (Vec<f64>, Vec<Vec<f64>>, Vec<f64>) {
    let n = model.n_states();
    let beta = model.discount;
    let mut p_sigma = DMatrix::<f64>::zeros(n, n);
    let mut r_sigma = DVector::<f64>::zeros(n);
    let mut rows = Vec::with_capacity(n);
    for x in 0..n {
        let mut per_action = Vec::new();
        for (i, &a) in sigma.feasible[x].iter().enumerate() {
            let w = sigma.probs[x][i];
            let r = model.payoff(x, a, m);
            let row = model.transition_row(x, a, m);
            r_sigma[x] += w * r;
            for &(y, p) in &row {
                p_sigma[(x, y)] += w * p;
            }
            per_action.push((r, row));
        }
        rows.push(per_action);
    }
    let a_mat = DMatrix::<f64>::identity(n, n) - p_sigma * beta;
    let lu = a_mat.clone().lu();
    let v = lu.solve(&r_sigma).expect("I - βP is nonsingular for β < 1");
    let rho = DVector::<f64>::from_element(n, 1.0 / n as f64);
    let y = a_mat.transpose().lu().solve(&rho).expect("nonsingular");
    let q = rows
        .iter()
        .map(|acts| acts.iter().map(|(r, row)| r + beta * row.iter().map(|&(t, p)| p * v[t]).sum::<f64>()).collect())
        .collect();
    (v.iter().copied().collect(), q, y.iter().copied().collect())
}

fn sampled_q(view: &SampleView<'_>, sigma: &DirectPolicy, m: &[f64], rollouts: usize, horizon: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = seed::rng_for(seed, &[]);
    let beta = view.discount();
    let draw = |x: usize, rng: &mut rand_chacha::ChaCha8Rng| {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (i, &a) in sigma.feasible[x].iter().enumerate() {
            acc += sigma.probs[x][i];
            if u < acc {
                return a;
            }
        }
        *sigma.feasible[x].last().expect("non-empty")
    };
    sigma
        .feasible
        .iter()
        .enumerate()
        .map(|(x0, acts)| {
            acts.iter()
                .map(|&a0| {
                    let mut total = 0.0;
                    for _ in 0..rollouts {
                        let (mut x, mut a, mut disc) = (x0, a0, 1.0);
                        for _ in 0..horizon {
                            let (r, next) = view.sample_step(x, a, m, &mut rng);
                            total += disc * r;
                            disc *= beta;
                            x = next;
                            a = draw(x, &mut rng);
                        }
                    }
                    total / rollouts as f64
                })
                .collect()
        })
        .collect()
}

/// Projected gradient ascent on `ρᵀV^σ` over direct policies:
/// `σ ← Proj_simplex(σ + rate · ∇σ)` row by row, from the uniform policy.
pub fn projected_policy_gradient(model: &ModelSpec, m: &[f64], cfg: &PolicyGradientConfig, seed: u64) -> PolicyGradientResult {
    let n = model.n_states();
    let mut sigma = DirectPolicy::uniform((0..n).map(|x| model.feasible(x).to_vec()).collect());
    for step in 0..cfg.steps {
        let grad: Vec<Vec<f64>> = match cfg.mode {
            GradientMode::Exact => {
                let (_, q, y) = policy_evaluation(model, &sigma, m);
                q.into_iter().zip(&y).map(|(qx, yx)| qx.into_iter().map(|v| yx * v).collect()).collect()
            }
            GradientMode::Sampled { rollouts, horizon } => {
                let view = model.sample_view();
                sampled_q(&view, &sigma, m, rollouts, horizon, seed::derive_seed(seed, &[step as u64]))
            }
        };
        for x in 0..n {
            let moved: Vec<f64> = sigma.probs[x].iter().zip(&grad[x]).map(|(p, g)| p + cfg.rate * g).collect();
            sigma.probs[x] = simplex_projection(&moved);
        }
    }
    let values = match cfg.mode {
        GradientMode::Exact => policy_evaluation(model, &sigma, m).0,
        GradientMode::Sampled { rollouts, horizon } => {
            let view = model.sample_view();
            let q = sampled_q(&view, &sigma, m, rollouts, horizon, seed::derive_seed(seed, &[u64::MAX]));
            q.iter().zip(&sigma.probs).map(|(qx, px)| qx.iter().zip(px).map(|(a, b)| a * b).sum()).collect()
        }
    };
    let objective = values.iter().sum::<f64>() / n as f64;
    PolicyGradientResult { policy: sigma, values, objective }
}
