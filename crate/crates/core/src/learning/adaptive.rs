use std::time::Instant;

use super::{greedy_policy, projected_policy_gradient, q_learning, DirectPolicy, LearningConfig, PolicyGradientConfig, QTable};
use crate::chain::monte_carlo_stationary;
use crate::equilibrium::{bisect, Algorithm, MfeSolution, SolverConfig, SolverError, Termination, TraceEntry};
use crate::model::{ModelSpec, PopulationState, SampleView, StationaryPolicy};
use crate::seed;

struct Outer<T> {
    m: f64,
    f: f64,
    policy: StationaryPolicy,
    population: PopulationState,
    clamped: bool,
    learned: T,
}

/// Dead-zone bisection around a learned residual
/// `f̂(m) = m − M(ŝ, ĝ, m)` where ĝ comes from `learn` and ŝ from a
/// Monte Carlo run of ĝ. Returns the stopping iterate when `|f̂| ≤ δ`,
/// otherwise the best iterate seen, flagged.
fn learned_bisection<T: Clone>(
    view: &SampleView<'_>,
    cfg: &SolverConfig,
    lcfg: &LearningConfig,
    algorithm: Algorithm,
    mut learn: impl FnMut(f64, u64) -> (StationaryPolicy, T),
) -> Result<(MfeSolution, T), SolverError> {
    cfg.validate()?;
    lcfg.validate()?;
    if view.bounds().dim() != 1 {
        return Err(SolverError::Dimension { expected: 1, got: view.bounds().dim() });
    }
    if lcfg.mc_start_state >= view.n_states() {
        return Err(SolverError::Config(format!("mc_start_state {} is not a state", lcfg.mc_start_state)));
    }
    let start = Instant::now();
    let mut outers: Vec<Outer<T>> = Vec::new();
    let outcome = bisect(view.bounds().lo[0], view.bounds().hi[0], cfg.residual_tol, cfg.bracket_tol, cfg.max_outer, |t, m| {
        let (policy, learned) = learn(m, seed::derive_seed(lcfg.seed, &[t as u64, 0]));
        let mc_seed = seed::derive_seed(lcfg.seed, &[t as u64, 1]);
        let population =
            monte_carlo_stationary(view, &policy, &[m], lcfg.mc_samples, mc_seed, lcfg.mc_start_state, lcfg.mc_burn_in);
        let eval = view.interaction_value(&population, &policy, &[m])?;
        let f = m - eval.value[0];
        log::debug!("{} {} outer {t}: m = {m:.6}, f̂ = {f:.3e}", view.name(), algorithm.as_str(), );
        outers.push(Outer { m, f, policy, population, clamped: eval.clamped, learned });
        Ok::<f64, SolverError>(f)
    })?;

    let converged = outcome.termination == Termination::ResidualTolerance;
    let pick = if converged { outcome.steps.len() - 1 } else { outcome.best };
    if !converged {
        log::warn!(
            "{}: {} stopped ({:?}) without |f̂| ≤ δ; returning best iterate |f̂| = {:.3e}",
            view.name(),
            algorithm.as_str(),
            outcome.termination,
            outers[pick].f.abs()
        );
    }
    let trace = outcome
        .steps
        .iter()
        .map(|s| TraceEntry { iteration: s.iteration, m: vec![s.m], f: vec![s.f], lo: Some(s.lo), hi: Some(s.hi) })
        .collect();
    let chosen = outers.swap_remove(pick);
    let solution = MfeSolution {
        model: view.name().to_string(),
        algorithm,
        m_star: vec![chosen.m],
        policy: chosen.policy,
        population: chosen.population,
        residual: chosen.f.abs(),
        consistency_residual: None,
        converged,
        termination: outcome.termination,
        trace,
        seeds: vec![lcfg.seed],
        wall_seconds: start.elapsed().as_secs_f64(),
        clamped: chosen.clamped,
    };
    Ok((solution, chosen.learned))
}

#[derive(Debug, Clone)]
pub struct AdaptiveQOutcome {
    pub solution: MfeSolution,
    /// Q-table learned at the returned interaction value.
    pub q_table: QTable,
}

/// Bisection over m with a freshly learned Q-table at every midpoint.
pub fn adaptive_q_learning(view: &SampleView<'_>, cfg: &SolverConfig, lcfg: &LearningConfig) -> Result<AdaptiveQOutcome, SolverError> {
    let (solution, q_table) = learned_bisection(view, cfg, lcfg, Algorithm::Qlearn, |m, s| {
        let q = q_learning(view, &[m], lcfg, s);
        (greedy_policy(&q), q)
    })?;
    Ok(AdaptiveQOutcome { solution, q_table })
}

#[derive(Debug, Clone)]
pub struct AdaptivePgOutcome {
    pub solution: MfeSolution,
    pub policy: DirectPolicy,
}

/// Bisection over m with projected policy gradient as the inner learner;
/// the population is simulated under the mode of σ.
pub fn adaptive_policy_gradient(
    model: &ModelSpec,
    cfg: &SolverConfig,
    lcfg: &LearningConfig,
    pcfg: &PolicyGradientConfig,
) -> Result<AdaptivePgOutcome, SolverError> {
    let view = model.sample_view();
    let (solution, policy) = learned_bisection(&view, cfg, lcfg, Algorithm::Pgrad, |m, s| {
        let out = projected_policy_gradient(model, &[m], pcfg, s);
        (out.policy.mode(&[m]), out.policy)
    })?;
    Ok(AdaptivePgOutcome { solution, policy })
}
