use serde::Serialize;

use super::{norm2, optimal_policy, MfeSolution, SolverConfig, SolverError};
use crate::chain;
use crate::model::ModelSpec;

/// Consistency tolerance on `‖sᵀL − s‖₁`.
pub const CONSISTENCY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub value: f64,
    pub tolerance: f64,
    pub detail: String,
}

/// The equilibrium conditions as executable checks: the policy is optimal
/// at m*, the population is invariant under the induced chain, and the
/// population reproduces m*.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Certificate {
    pub checks: Vec<Check>,
}

impl Certificate {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

pub fn certify(model: &ModelSpec, sol: &MfeSolution, cfg: &SolverConfig) -> Result<Certificate, SolverError> {
    let m = &sol.m_star;
    if m.len() != model.bounds.dim() {
        return Err(SolverError::Dimension { expected: model.bounds.dim(), got: m.len() });
    }
    if sol.population.len() != model.n_states() || sol.policy.action_of.len() != model.n_states() {
        return Err(SolverError::Dimension { expected: model.n_states(), got: sol.population.len() });
    }

    let (_, rederived) = optimal_policy(model, m, cfg);
    let mismatched: Vec<usize> =
        (0..model.n_states()).filter(|&x| rederived.action(x) != sol.policy.action(x)).collect();
    let optimality = Check {
        name: "optimality",
        passed: mismatched.is_empty() && sol.policy.check_feasible(&model.actions).is_ok(),
        value: mismatched.len() as f64,
        tolerance: 0.0,
        detail: if mismatched.is_empty() {
            "policy equals the greedy policy re-derived at m*".into()
        } else {
            let labels: Vec<&str> = mismatched.iter().take(5).map(|&x| model.states.label(x)).collect();
            format!("{} state(s) differ, e.g. {labels:?}", mismatched.len())
        },
    };

    let l = chain::build_chain(model, &sol.policy, m);
    let consistency_value = l.invariance_residual(sol.population.probs());
    let consistency = Check {
        name: "consistency",
        passed: consistency_value <= CONSISTENCY_TOL,
        value: consistency_value,
        tolerance: CONSISTENCY_TOL,
        detail: "‖sᵀL − s‖₁ under the recorded policy".into(),
    };

    let eval = model.interaction_value(&sol.population, &sol.policy, m)?;
    let gap: Vec<f64> = m.iter().zip(&eval.value).map(|(a, b)| a - b).collect();
    let gap_norm = norm2(&gap);
    let interaction = Check {
        name: "interaction",
        passed: gap_norm <= cfg.residual_tol,
        value: gap_norm,
        tolerance: cfg.residual_tol,
        detail: format!("M(population) = {:?}", eval.value),
    };

    Ok(Certificate { checks: vec![optimality, consistency, interaction] })
}
