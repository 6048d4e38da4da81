use std::time::Instant;

use super::{optimal_policy, Algorithm, MfeSolution, SolverConfig, SolverError, Termination, TraceEntry};
use crate::chain;
use crate::model::{ModelSpec, PopulationState};

#[derive(Debug, Clone, PartialEq)]
pub struct FixedPointStep {
    pub iteration: usize,
    pub m: Vec<f64>,
    pub population: Vec<f64>,
    /// `‖s_{t+1} − s_t‖₁`.
    pub change: f64,
}

#[derive(Debug, Clone)]
pub struct FixedPointOutcome {
    pub solution: MfeSolution,
    pub steps: Vec<FixedPointStep>,
}

/// The naive iteration `s_{t+1} = (1−α)s_t + α s_tᵀ L_{M(s_t), g_t}`.
///
/// Non-convergence is a normal outcome (it is what motivates the bracketing
/// solvers); the full trajectory is returned either way.
pub fn fixed_point_iteration(
    model: &ModelSpec,
    s0: &PopulationState,
    cfg: &SolverConfig,
) -> Result<FixedPointOutcome, SolverError> {
    cfg.validate()?;
    if s0.len() != model.n_states() {
        return Err(SolverError::Dimension { expected: model.n_states(), got: s0.len() });
    }
    let start = Instant::now();
    let alpha = cfg.damping;
    // M may depend on the policy, so the very first evaluation borrows the
    // policy that is optimal at the middle of the bounds.
    let (_, mut g) = optimal_policy(model, &model.bounds.midpoint(), cfg);
    let mut s = s0.probs().to_vec();
    let mut steps = Vec::new();
    let mut clamped = false;
    let mut termination = Termination::IterationCap;
    let mut m = model.bounds.midpoint();

    for t in 0..cfg.fp_max_iters {
        let state = PopulationState::from_weights(s.clone())?;
        let eval = model.interaction_value(&state, &g, &m)?;
        clamped |= eval.clamped;
        m = eval.value;
        let (_, g_t) = optimal_policy(model, &m, cfg);
        g = g_t;
        let l = chain::build_chain(model, &g, &m);
        let pushed = l.left_apply(&s);
        let next: Vec<f64> = s.iter().zip(&pushed).map(|(a, b)| (1.0 - alpha) * a + alpha * b).collect();
        let change: f64 = next.iter().zip(&s).map(|(a, b)| (a - b).abs()).sum();
        steps.push(FixedPointStep { iteration: t, m: m.clone(), population: s.clone(), change });
        s = next;
        if change <= cfg.fp_tol {
            termination = Termination::PopulationTolerance;
            break;
        }
    }

    let population = PopulationState::from_weights(s)?;
    let check = model.interaction_value(&population, &g, &m)?;
    let f: Vec<f64> = m.iter().zip(&check.value).map(|(a, b)| a - b).collect();
    let l = chain::build_chain(model, &g, &m);
    let converged = termination == Termination::PopulationTolerance;
    if !converged {
        log::warn!("{}: fixed-point iteration did not settle in {} iterations", model.name, cfg.fp_max_iters);
    }
    let trace = steps
        .iter()
        .map(|st| TraceEntry { iteration: st.iteration, m: st.m.clone(), f: vec![st.change], lo: None, hi: None })
        .collect();
    let solution = MfeSolution {
        model: model.name.clone(),
        algorithm: Algorithm::Fixedpoint,
        m_star: m,
        policy: g,
        residual: super::norm2(&f),
        consistency_residual: Some(l.invariance_residual(population.probs())),
        population,
        converged,
        termination,
        trace,
        seeds: Vec::new(),
        wall_seconds: start.elapsed().as_secs_f64(),
        clamped,
    };
    Ok(FixedPointOutcome { solution, steps })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::toy::build_two_state_toy;

    #[test]
    fn toy_cycles_with_period_two() {
        let model = build_two_state_toy();
        let s0 = PopulationState::new(vec![0.3, 0.7]).unwrap();
        let out = fixed_point_iteration(&model, &s0, &SolverConfig::default()).unwrap();
        assert!(!out.solution.converged);
        assert_eq!(out.steps.len(), 1000);
        for w in out.steps.windows(3) {
            let back: f64 = w[0].population.iter().zip(&w[2].population).map(|(a, b)| (a - b).abs()).sum();
            assert!(back <= 1e-12);
            assert!(w[0].change > 0.79);
        }
    }

    #[test]
    fn toy_equilibrium_is_fixed() {
        let model = build_two_state_toy();
        let out = fixed_point_iteration(&model, &PopulationState::uniform(2), &SolverConfig::default()).unwrap();
        assert!(out.solution.converged);
        assert_eq!(out.steps.len(), 1);
        assert_eq!(out.solution.m_star, vec![0.5]);
    }

    #[test]
    fn damping_settles_the_toy() {
        let model = build_two_state_toy();
        let s0 = PopulationState::new(vec![0.3, 0.7]).unwrap();
        let cfg = SolverConfig { damping: 0.5, ..SolverConfig::default() };
        let out = fixed_point_iteration(&model, &s0, &cfg).unwrap();
        assert!(out.solution.converged);
        assert!((out.solution.m_star[0] - 0.5).abs() < 1e-6);
    }
}
