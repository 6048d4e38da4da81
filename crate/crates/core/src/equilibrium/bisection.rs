use std::collections::HashMap;
use std::time::Instant;

use super::{residual, Algorithm, MfeSolution, ResidualEval, SolverConfig, SolverError, Termination, TraceEntry};
use crate::model::ModelSpec;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BracketStep {
    pub iteration: usize,
    pub lo: f64,
    pub hi: f64,
    pub m: f64,
    pub f: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BisectionOutcome {
    pub steps: Vec<BracketStep>,
    pub termination: Termination,
    /// Index of the step with the smallest `|f|`.
    pub best: usize,
}

impl BisectionOutcome {
    pub fn last(&self) -> &BracketStep {
        self.steps.last().expect("at least one step")
    }

    pub fn best_step(&self) -> &BracketStep {
        &self.steps[self.best]
    }
}

/// Bisection with a dead zone: the upper end moves to `m` when
/// `f(m) > δ`, the lower end when `f(m) < −δ`, and `|f(m)| ≤ δ` stops.
/// With an exact residual this is ordinary bisection; with a noisy one the
/// bracket stays valid as long as the noise never exceeds δ.
pub fn bisect<E>(
    lo: f64,
    hi: f64,
    delta: f64,
    eps: f64,
    max_outer: usize,
    mut eval: impl FnMut(usize, f64) -> Result<f64, E>,
) -> Result<BisectionOutcome, E> {
    let (mut a, mut b) = (lo, hi);
    let mut steps = Vec::new();
    let mut termination = Termination::IterationCap;
    for t in 0..max_outer {
        let m = 0.5 * (a + b);
        let f = eval(t, m)?;
        steps.push(BracketStep { iteration: t, lo: a, hi: b, m, f });
        if f.abs() <= delta {
            termination = Termination::ResidualTolerance;
            break;
        }
        if f > delta {
            b = m;
        } else if f < -delta {
            a = m;
        }
        if b - a <= eps {
            termination = Termination::BracketWidth;
            break;
        }
    }
    let best = (0..steps.len())
        .min_by(|&i, &j| steps[i].f.abs().total_cmp(&steps[j].f.abs()))
        .expect("max_outer >= 1");
    Ok(BisectionOutcome { steps, termination, best })
}

/// Bisection on the exact residual, one value iteration per midpoint.
pub fn adaptive_vfi(model: &ModelSpec, cfg: &SolverConfig) -> Result<MfeSolution, SolverError> {
    cfg.validate()?;
    if model.bounds.dim() != 1 {
        return Err(SolverError::Dimension { expected: 1, got: model.bounds.dim() });
    }
    let start = Instant::now();
    let (lo, hi) = (model.bounds.lo[0], model.bounds.hi[0]);

    // Endpoint check on the raw interaction; clamping would hide a
    // misconfigured bracket.
    let f_lo = {
        let r = residual(model, &[lo], cfg)?;
        lo - r.interaction.raw[0]
    };
    let f_hi = {
        let r = residual(model, &[hi], cfg)?;
        hi - r.interaction.raw[0]
    };
    if f_lo > 1e-12 || f_hi < -1e-12 {
        return Err(SolverError::NoBracket { f_lo, f_hi });
    }

    let mut memo: HashMap<u64, ResidualEval> = HashMap::new();
    let outcome = bisect(lo, hi, cfg.residual_tol, cfg.bracket_tol, cfg.max_outer, |t, m| {
        let r = match memo.get(&m.to_bits()) {
            Some(r) => r.clone(),
            None => {
                let r = residual(model, &[m], cfg)?;
                memo.insert(m.to_bits(), r.clone());
                r
            }
        };
        log::debug!("{} bisection {t}: m = {m:.8}, f = {:.3e}", model.name, r.f[0]);
        Ok::<f64, SolverError>(r.f[0])
    })?;

    let last = *outcome.last();
    let eval = &memo[&last.m.to_bits()];
    let converged = last.f.abs() <= cfg.residual_tol;
    if !converged {
        log::warn!(
            "{}: bisection stopped ({:?}) with |f| = {:.3e} > δ = {:.1e}",
            model.name,
            outcome.termination,
            last.f.abs(),
            cfg.residual_tol
        );
    }
    let trace = outcome
        .steps
        .iter()
        .map(|s| TraceEntry { iteration: s.iteration, m: vec![s.m], f: vec![s.f], lo: Some(s.lo), hi: Some(s.hi) })
        .collect();
    Ok(MfeSolution {
        model: model.name.clone(),
        algorithm: Algorithm::Vfi,
        m_star: vec![last.m],
        policy: eval.policy.clone(),
        population: eval.population.clone(),
        residual: last.f.abs(),
        consistency_residual: Some(eval.consistency_residual),
        converged,
        termination: outcome.termination,
        trace,
        seeds: Vec::new(),
        wall_seconds: start.elapsed().as_secs_f64(),
        clamped: eval.interaction.clamped,
    })
}
