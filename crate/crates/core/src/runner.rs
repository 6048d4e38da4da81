//! Dispatch from a resolved [`RunConfig`] to the chosen solver.

use thiserror::Error;

use crate::config::{ConfigError, RunConfig};
use crate::equilibrium::{self, adaptive_vfi, broyden_solve, fixed_point_iteration, Algorithm, FixedPointStep, MfeSolution, SolverError};
use crate::learning::{adaptive_policy_gradient, adaptive_q_learning, DirectPolicy, LearningConfig, QTable};
use crate::model::{ModelError, ModelSpec, PopulationState};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub model: ModelSpec,
    pub solution: MfeSolution,
    pub q_table: Option<QTable>,
    pub direct_policy: Option<DirectPolicy>,
    pub fixed_point: Option<Vec<FixedPointStep>>,
}

pub fn build_model(cfg: &RunConfig) -> Result<ModelSpec, RunError> {
    Ok(cfg.params.build()?)
}

/// Runs `algorithm` on the configured model. `seed` drives every random
/// stream of the model-free solvers.
pub fn solve(cfg: &RunConfig, algorithm: Algorithm, seed: u64) -> Result<SolveOutcome, RunError> {
    let model = build_model(cfg)?;
    let lcfg = LearningConfig { seed, ..cfg.learning.clone() };
    let (mut q_table, mut direct_policy, mut fixed_point) = (None, None, None);
    let mut solution = match algorithm {
        Algorithm::Vfi => adaptive_vfi(&model, &cfg.solver)?,
        Algorithm::Broyden => broyden_solve(&model, &cfg.solver, &cfg.broyden)?,
        Algorithm::Fixedpoint => {
            let s0 = match &cfg.fixed_point.initial {
                Some(v) => PopulationState::new(v.clone())?,
                None => PopulationState::point_mass(model.n_states(), 0),
            };
            let fp = fixed_point_iteration(&model, &s0, &cfg.solver)?;
            fixed_point = Some(fp.steps);
            fp.solution
        }
        Algorithm::Qlearn => {
            let res = adaptive_q_learning(&model.sample_view(), &cfg.solver, &lcfg)?;
            q_table = Some(res.q_table);
            res.solution
        }
        Algorithm::Pgrad => {
            let res = adaptive_policy_gradient(&model, &cfg.solver, &lcfg, &cfg.policy_gradient)?;
            direct_policy = Some(res.policy);
            res.solution
        }
    };
    solution.seeds = vec![seed];
    Ok(SolveOutcome { model, solution, q_table, direct_policy, fixed_point })
}

/// Certificate of a solution against the configured model.
pub fn certify(cfg: &RunConfig, solution: &MfeSolution) -> Result<equilibrium::Certificate, RunError> {
    let model = build_model(cfg)?;
    Ok(equilibrium::certify(&model, solution, &cfg.solver)?)
}
