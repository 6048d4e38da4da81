//! Single-agent dynamic program at a fixed interaction value.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::model::{ModelSpec, SparseRow, StationaryPolicy};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueTable {
    pub values: Vec<f64>,
    pub interaction: Vec<f64>,
    pub sup_norm_residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl ValueTable {
    pub fn zeros(n: usize, m: &[f64]) -> Self {
        Self { values: vec![0.0; n], interaction: m.to_vec(), sup_norm_residual: f64::INFINITY, iterations: 0, converged: false }
    }
}

/// Payoffs and transition rows of every feasible pair, evaluated once per m.
/// Value iteration touches them hundreds of times.
pub struct Lookahead {
    pub discount: f64,
    pub pairs: Vec<Vec<(usize, f64, SparseRow)>>,
}

impl Lookahead {
    pub fn new(model: &ModelSpec, m: &[f64]) -> Self {
        let pairs = (0..model.n_states())
            .map(|x| {
                model
                    .feasible(x)
                    .iter()
                    .map(|&a| (a, model.payoff(x, a, m), model.transition_row(x, a, m)))
                    .collect()
            })
            .collect();
        Self { discount: model.discount, pairs }
    }

    fn q(&self, reward: f64, row: &[(usize, f64)], v: &[f64]) -> f64 {
        reward + self.discount * row.iter().map(|&(y, p)| p * v[y]).sum::<f64>()
    }

    /// One-step lookahead values `(action, Q(x, a))` for every feasible a.
    pub fn q_row(&self, x: usize, v: &[f64]) -> Vec<(usize, f64)> {
        self.pairs[x].iter().map(|(a, r, row)| (*a, self.q(*r, row, v))).collect()
    }

    pub fn backup(&self, v: &[f64]) -> Vec<f64> {
        self.pairs
            .iter()
            .map(|pairs| pairs.iter().map(|(_, r, row)| self.q(*r, row, v)).fold(f64::NEG_INFINITY, f64::max))
            .collect()
    }

    /// Greedy action with lowest-index tie-breaking (feasible sets are
    /// stored in increasing order, so "first maximum" is "lowest index").
    pub fn greedy(&self, v: &[f64]) -> Vec<usize> {
        (0..self.pairs.len()).map(|x| argmax_first(&self.q_row(x, v))).collect()
    }
}

fn argmax_first(q: &[(usize, f64)]) -> usize {
    let mut best = q[0];
    for &(a, val) in &q[1..] {
        if val > best.1 {
            best = (a, val);
        }
    }
    best.0
}

fn sup_norm_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn bellman_backup(model: &ModelSpec, v: &ValueTable, m: &[f64]) -> ValueTable {
    let next = Lookahead::new(model, m).backup(&v.values);
    let residual = sup_norm_diff(&next, &v.values);
    ValueTable { values: next, interaction: m.to_vec(), sup_norm_residual: residual, iterations: v.iterations + 1, converged: false }
}

/// Plain value iteration from V = 0, stopping at the first iterate whose
/// sup-norm change is at most `tol`. Hitting `max_iters` returns the last
/// iterate with `converged = false`.
pub fn value_iteration(model: &ModelSpec, m: &[f64], tol: f64, max_iters: usize) -> ValueTable {
    let table = Lookahead::new(model, m);
    value_iteration_on(&table, m, tol, max_iters)
}

pub fn value_iteration_on(table: &Lookahead, m: &[f64], tol: f64, max_iters: usize) -> ValueTable {
    assert!(tol > 0.0 && max_iters >= 1);
    let mut v = vec![0.0; table.pairs.len()];
    let mut residual = f64::INFINITY;
    for it in 1..=max_iters {
        let next = table.backup(&v);
        residual = sup_norm_diff(&next, &v);
        v = next;
        if residual <= tol {
            return ValueTable { values: v, interaction: m.to_vec(), sup_norm_residual: residual, iterations: it, converged: true };
        }
    }
    log::warn!("value iteration hit the cap of {max_iters} iterations (residual {residual:e})");
    ValueTable { values: v, interaction: m.to_vec(), sup_norm_residual: residual, iterations: max_iters, converged: false }
}

pub fn extract_policy(model: &ModelSpec, v: &ValueTable, m: &[f64]) -> StationaryPolicy {
    StationaryPolicy::new(Lookahead::new(model, m).greedy(&v.values), m.to_vec())
}

/// Greedy policy after adding i.i.d. uniform noise of size `magnitude` to
/// each lookahead value; breaks genuine payoff ties at random but
/// reproducibly.
pub fn extract_policy_perturbed(model: &ModelSpec, v: &ValueTable, m: &[f64], magnitude: f64, seed: u64) -> StationaryPolicy {
    let table = Lookahead::new(model, m);
    let mut rng = seed::rng_for(seed, &[]);
    let action_of = (0..model.n_states())
        .map(|x| {
            let noisy: Vec<(usize, f64)> =
                table.q_row(x, &v.values).into_iter().map(|(a, q)| (a, q + magnitude * rng.random::<f64>())).collect();
            argmax_first(&noisy)
        })
        .collect();
    StationaryPolicy::new(action_of, m.to_vec())
}

/// Dense `Q(x, a)` for feasible pairs, `NaN` elsewhere.
pub fn q_values(model: &ModelSpec, v: &[f64], m: &[f64]) -> Vec<Vec<f64>> {
    let table = Lookahead::new(model, m);
    (0..model.n_states())
        .map(|x| {
            let mut row = vec![f64::NAN; model.actions.len()];
            for (a, q) in table.q_row(x, v) {
                row[a] = q;
            }
            row
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ActionSpace, Dynamics, PopulationState, ScalarBounds, StateSpace};
    use std::sync::Arc;

    struct Bandit {
        rewards: Vec<f64>,
    }

    impl Dynamics for Bandit {
        fn payoff(&self, _x: usize, a: usize, _m: &[f64]) -> f64 {
            self.rewards[a]
        }
        fn transition_row(&self, _x: usize, _a: usize, _m: &[f64]) -> SparseRow {
            vec![(0, 1.0)]
        }
        fn interaction(&self, _: &PopulationState, _: &StationaryPolicy, _: &[f64]) -> Vec<f64> {
            vec![0.0]
        }
    }

    fn bandit(rewards: Vec<f64>, beta: f64) -> ModelSpec {
        let n = rewards.len();
        ModelSpec::new(
            "bandit",
            StateSpace::indexed(1).unwrap(),
            ActionSpace::unrestricted((0..n).map(|a| a as f64).collect(), 1),
            beta,
            ScalarBounds::scalar(0.0, 1.0).unwrap(),
            Arc::new(Bandit { rewards }),
        )
        .unwrap()
    }

    #[test]
    fn single_backup_and_geometric_limit() {
        let model = bandit(vec![1.0], 0.5);
        let v = bellman_backup(&model, &ValueTable::zeros(1, &[0.0]), &[0.0]);
        assert_eq!(v.values, vec![1.0]);
        assert_eq!(v.sup_norm_residual, 1.0);
        let v = value_iteration(&model, &[0.0], 1e-10, 10_000);
        assert!(v.converged);
        assert!((v.values[0] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn myopic_agent_converges_in_one_step() {
        let model = bandit(vec![0.0, 1.0], 0.0);
        let v = value_iteration(&model, &[0.0], 1e-12, 10);
        // First backup moves V by 1, the second by 0.
        assert_eq!(v.values, vec![1.0]);
        assert!(v.iterations <= 2);
        assert_eq!(extract_policy(&model, &v, &[0.0]).action(0), 1);
    }

    #[test]
    fn ties_go_to_lowest_index() {
        let model = bandit(vec![3.0, 3.0, 3.0], 0.9);
        let v = value_iteration(&model, &[0.0], 1e-8, 10_000);
        assert_eq!(extract_policy(&model, &v, &[0.0]).action(0), 0);
    }

    #[test]
    fn cap_exhaustion_is_flagged() {
        let model = bandit(vec![1.0], 0.99);
        let v = value_iteration(&model, &[0.0], 1e-12, 5);
        assert!(!v.converged);
        assert_eq!(v.iterations, 5);
        assert!(v.sup_norm_residual > 1e-12);
    }

    #[test]
    fn perturbation_is_reproducible() {
        let model = bandit(vec![3.0, 3.0, 3.0], 0.0);
        let v = value_iteration(&model, &[0.0], 1e-8, 10);
        let a = extract_policy_perturbed(&model, &v, &[0.0], 1e-6, 11);
        let b = extract_policy_perturbed(&model, &v, &[0.0], 1e-6, 11);
        assert_eq!(a, b);
    }
}
