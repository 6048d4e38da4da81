//! Model-based equilibrium solvers.
//!
//! The residual `f(m) = m − M(s^{m,g})` chains value iteration, greedy
//! policy extraction, the induced chain and its invariant law. Its roots are
//! the stationary equilibria; [`adaptive_vfi`] brackets one by bisection,
//! [`broyden_solve`] handles vector-valued interactions, and
//! [`fixed_point_iteration`] is the naive baseline that can cycle.

mod bisection;
mod broyden;
mod certificate;
mod fixed_point;

pub use bisection::{adaptive_vfi, bisect, BisectionOutcome, BracketStep};
pub use broyden::{broyden, broyden_solve, BroydenConfig, BroydenOutcome};
pub use certificate::{certify, Certificate, Check};
pub use fixed_point::{fixed_point_iteration, FixedPointOutcome, FixedPointStep};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chain::{self, ChainError};
use crate::dp::{self, Lookahead, ValueTable};
use crate::model::{InteractionEval, ModelError, ModelSpec, PopulationState, StationaryPolicy};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("chain at m = {m:?}: {source}")]
    Chain { m: Vec<f64>, source: ChainError },
    #[error("no bracketed root: f(lo) = {f_lo}, f(hi) = {f_hi}")]
    NoBracket { f_lo: f64, f_hi: f64 },
    #[error("solver needs a {expected}-dimensional interaction, model has {got}")]
    Dimension { expected: usize, got: usize },
    #[error("invalid solver configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Bracket width at which bisection stops (ε).
    pub bracket_tol: f64,
    /// Residual tolerance (δ).
    pub residual_tol: f64,
    pub vfi_tol: f64,
    pub vfi_max_iters: usize,
    pub max_outer: usize,
    /// Damping weight α of the fixed-point baseline.
    pub damping: f64,
    pub fp_max_iters: usize,
    pub fp_tol: f64,
    /// Uniform noise added to lookahead values before the argmax; `None`
    /// keeps deterministic lowest-index tie-breaking.
    pub tie_perturbation: Option<f64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            bracket_tol: 1e-6,
            residual_tol: 1e-3,
            vfi_tol: 1e-4,
            vfi_max_iters: 1000,
            max_outer: 60,
            damping: 1.0,
            fp_max_iters: 1000,
            fp_tol: 1e-6,
            tie_perturbation: None,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        let bad = |msg: &str| Err(SolverError::Config(msg.into()));
        if !(self.bracket_tol > 0.0) || !(self.residual_tol > 0.0) {
            return bad("bracket_tol and residual_tol must be positive");
        }
        if !(self.vfi_tol > 0.0) || self.vfi_max_iters == 0 || self.max_outer == 0 {
            return bad("vfi_tol must be positive and iteration caps at least 1");
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return bad("damping must lie in (0, 1]");
        }
        if !(self.fp_tol > 0.0) || self.fp_max_iters == 0 {
            return bad("fp_tol must be positive and fp_max_iters at least 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Vfi,
    Qlearn,
    Pgrad,
    Broyden,
    Fixedpoint,
}

impl Algorithm {
    pub fn model_free(self) -> bool {
        matches!(self, Algorithm::Qlearn | Algorithm::Pgrad)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Vfi => "vfi",
            Algorithm::Qlearn => "qlearn",
            Algorithm::Pgrad => "pgrad",
            Algorithm::Broyden => "broyden",
            Algorithm::Fixedpoint => "fixedpoint",
        }
    }
}

impl std::str::FromStr for Algorithm {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "vfi" => Ok(Algorithm::Vfi),
            "qlearn" => Ok(Algorithm::Qlearn),
            "pgrad" => Ok(Algorithm::Pgrad),
            "broyden" => Ok(Algorithm::Broyden),
            "fixedpoint" => Ok(Algorithm::Fixedpoint),
            other => Err(format!("unknown algorithm '{other}' (expected vfi|qlearn|pgrad|broyden|fixedpoint)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    ResidualTolerance,
    BracketWidth,
    IterationCap,
    PopulationTolerance,
}

/// One outer iteration: the interaction tried, its residual, and for
/// bisection the bracket it was drawn from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iteration: usize,
    pub m: Vec<f64>,
    pub f: Vec<f64>,
    pub lo: Option<f64>,
    pub hi: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MfeSolution {
    pub model: String,
    pub algorithm: Algorithm,
    pub m_star: Vec<f64>,
    pub policy: StationaryPolicy,
    pub population: PopulationState,
    /// `|f(m*)|`, Euclidean norm for vector interactions.
    pub residual: f64,
    /// `‖sᵀL − s‖₁` under the exact chain; absent for model-free solvers,
    /// which never see the transition law.
    pub consistency_residual: Option<f64>,
    pub converged: bool,
    pub termination: Termination,
    pub trace: Vec<TraceEntry>,
    pub seeds: Vec<u64>,
    pub wall_seconds: f64,
    pub clamped: bool,
}

/// Everything computed on the way to `f(m)`.
#[derive(Debug, Clone)]
pub struct ResidualEval {
    pub m: Vec<f64>,
    pub f: Vec<f64>,
    pub interaction: InteractionEval,
    pub value: ValueTable,
    pub policy: StationaryPolicy,
    pub population: PopulationState,
    pub consistency_residual: f64,
}

impl ResidualEval {
    pub fn norm(&self) -> f64 {
        norm2(&self.f)
    }
}

pub(crate) fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Optimal policy at m: value iteration then greedy extraction.
pub fn optimal_policy(model: &ModelSpec, m: &[f64], cfg: &SolverConfig) -> (ValueTable, StationaryPolicy) {
    let table = Lookahead::new(model, m);
    let value = dp::value_iteration_on(&table, m, cfg.vfi_tol, cfg.vfi_max_iters);
    let policy = match cfg.tie_perturbation {
        Some(eps) if eps > 0.0 => {
            let bits = m.iter().fold(0u64, |acc, v| acc.rotate_left(17) ^ v.to_bits());
            dp::extract_policy_perturbed(model, &value, m, eps, bits)
        }
        _ => StationaryPolicy::new(table.greedy(&value.values), m.to_vec()),
    };
    (value, policy)
}

/// `f(m) = m − M(s^{m,g})`.
pub fn residual(model: &ModelSpec, m: &[f64], cfg: &SolverConfig) -> Result<ResidualEval, SolverError> {
    if m.len() != model.bounds.dim() {
        return Err(SolverError::Dimension { expected: model.bounds.dim(), got: m.len() });
    }
    let (value, policy) = optimal_policy(model, m, cfg);
    let l = chain::build_chain(model, &policy, m);
    let population =
        chain::stationary_distribution(&l).map_err(|source| SolverError::Chain { m: m.to_vec(), source })?;
    let consistency_residual = l.invariance_residual(population.probs());
    let interaction = model.interaction_value(&population, &policy, m)?;
    let f = m.iter().zip(&interaction.value).map(|(a, b)| a - b).collect();
    Ok(ResidualEval { m: m.to_vec(), f, interaction, value, policy, population, consistency_residual })
}
