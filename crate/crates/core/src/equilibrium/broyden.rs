use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{norm2, residual, Algorithm, MfeSolution, SolverConfig, SolverError, Termination, TraceEntry};
use crate::model::ModelSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BroydenConfig {
    /// Stop once `‖f‖₂ < tol`.
    pub tol: f64,
    pub max_iters: usize,
    /// Starting point; `None` means the middle of the box.
    pub m0: Option<Vec<f64>>,
}

impl Default for BroydenConfig {
    fn default() -> Self {
        Self { tol: 1e-3, max_iters: 50, m0: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BroydenOutcome {
    pub m: Vec<f64>,
    pub f: Vec<f64>,
    /// Number of quasi-Newton steps taken.
    pub iterations: usize,
    pub restarts: usize,
    pub converged: bool,
    /// `(m_t, f(m_t))` for every evaluated iterate, starting with m0.
    pub trace: Vec<(Vec<f64>, Vec<f64>)>,
}

fn project(m: &mut [f64], lo: &[f64], hi: &[f64]) {
    for (i, v) in m.iter_mut().enumerate() {
        *v = v.clamp(lo[i], hi[i]);
    }
}

/// Projected Broyden iteration with the "good" rank-one update
/// `B += (Δf − Bθ)θᵀ / θᵀθ`, starting from `B = I`.
///
/// A zero step or a singular `B` resets `B` to the identity. Without
/// convergence the best iterate seen is returned.
pub fn broyden<E>(
    mut f: impl FnMut(&[f64]) -> Result<Vec<f64>, E>,
    m0: &[f64],
    lo: &[f64],
    hi: &[f64],
    tol: f64,
    max_iters: usize,
) -> Result<BroydenOutcome, E> {
    let n = m0.len();
    let mut m = m0.to_vec();
    project(&mut m, lo, hi);
    let mut fm = f(&m)?;
    let mut b = DMatrix::<f64>::identity(n, n);
    let mut trace = vec![(m.clone(), fm.clone())];
    let mut restarts = 0;
    let mut iterations = 0;

    while norm2(&fm) >= tol && iterations < max_iters {
        let rhs = DVector::from_column_slice(&fm);
        let step = match b.clone().lu().solve(&rhs) {
            Some(d) if d.iter().all(|v| v.is_finite()) => d,
            _ => {
                restarts += 1;
                b = DMatrix::identity(n, n);
                rhs.clone()
            }
        };
        let mut next: Vec<f64> = m.iter().zip(step.iter()).map(|(a, d)| a - d).collect();
        project(&mut next, lo, hi);
        let f_next = f(&next)?;
        iterations += 1;

        let theta = DVector::from_iterator(n, next.iter().zip(&m).map(|(a, b)| a - b));
        let tt = theta.dot(&theta);
        if tt == 0.0 {
            restarts += 1;
            b = DMatrix::identity(n, n);
        } else {
            let df = DVector::from_iterator(n, f_next.iter().zip(&fm).map(|(a, b)| a - b));
            let correction = (&df - &b * &theta) * theta.transpose() / tt;
            b += correction;
        }
        m = next;
        fm = f_next;
        trace.push((m.clone(), fm.clone()));
    }

    let converged = norm2(&fm) < tol;
    if !converged {
        let (bm, bf) = trace
            .iter()
            .min_by(|a, b| norm2(&a.1).total_cmp(&norm2(&b.1)))
            .cloned()
            .expect("non-empty trace");
        m = bm;
        fm = bf;
    }
    Ok(BroydenOutcome { m, f: fm, iterations, restarts, converged, trace })
}

/// Broyden's method on the exact residual of an n-dimensional interaction.
pub fn broyden_solve(model: &ModelSpec, cfg: &SolverConfig, bcfg: &BroydenConfig) -> Result<MfeSolution, SolverError> {
    cfg.validate()?;
    let start = Instant::now();
    let m0 = bcfg.m0.clone().unwrap_or_else(|| model.bounds.midpoint());
    if m0.len() != model.bounds.dim() {
        return Err(SolverError::Dimension { expected: model.bounds.dim(), got: m0.len() });
    }
    let outcome = broyden(
        |m| residual(model, m, cfg).map(|r| r.f),
        &m0,
        &model.bounds.lo,
        &model.bounds.hi,
        bcfg.tol,
        bcfg.max_iters,
    )?;
    if outcome.restarts > 0 {
        log::warn!("{}: Broyden restarted {} time(s)", model.name, outcome.restarts);
    }
    let eval = residual(model, &outcome.m, cfg)?;
    let trace = outcome
        .trace
        .iter()
        .enumerate()
        .map(|(i, (m, f))| TraceEntry { iteration: i, m: m.clone(), f: f.clone(), lo: None, hi: None })
        .collect();
    Ok(MfeSolution {
        model: model.name.clone(),
        algorithm: Algorithm::Broyden,
        m_star: outcome.m,
        policy: eval.policy,
        population: eval.population,
        residual: norm2(&outcome.f),
        consistency_residual: Some(eval.consistency_residual),
        converged: outcome.converged,
        termination: if outcome.converged { Termination::ResidualTolerance } else { Termination::IterationCap },
        trace,
        seeds: Vec::new(),
        wall_seconds: start.elapsed().as_secs_f64(),
        clamped: eval.interaction.clamped,
    })
}
