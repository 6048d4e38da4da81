use serde::Serialize;

use super::sweep::{SweepResult, SweepRow};

/// Noise band for model-based solvers.
pub const EXACT_TOL: f64 = 1e-3;
/// Noise band for learned solutions.
pub const LEARNED_TOL: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Direction {
    Nondecreasing,
    Nonincreasing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Metric {
    /// First coordinate of m*.
    MStar,
    MeanState,
    VarState,
    Revenue,
}

impl Metric {
    pub fn of(self, row: &SweepRow) -> f64 {
        match self {
            Metric::MStar => row.m_star.first().copied().unwrap_or(f64::NAN),
            Metric::MeanState => row.mean_state,
            Metric::VarState => row.var_state,
            Metric::Revenue => row.revenue.unwrap_or(f64::NAN),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonotonicityReport {
    pub passed: bool,
    pub values: Vec<f64>,
    /// `(i, j, value_i, value_j)` with `i < j` out of order by more than
    /// the tolerance, or involving a missing value.
    pub violations: Vec<(usize, usize, f64, f64)>,
}

/// Weak monotonicity of `metric` along the row order of a one-axis sweep,
/// up to `tol`. Every pair is compared, so slow drifts are caught too.
pub fn monotonicity_check(result: &SweepResult, metric: Metric, direction: Direction, tol: f64) -> MonotonicityReport {
    let values: Vec<f64> = result.rows.iter().map(|r| metric.of(r)).collect();
    let mut violations = Vec::new();
    for i in 0..values.len() {
        for j in i + 1..values.len() {
            let (a, b) = (values[i], values[j]);
            let bad = match direction {
                Direction::Nondecreasing => !(b >= a - tol),
                Direction::Nonincreasing => !(b <= a + tol),
            };
            if bad {
                violations.push((i, j, a, b));
            }
        }
    }
    MonotonicityReport { passed: violations.is_empty(), values, violations }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn result(ms: &[f64]) -> SweepResult {
        let rows = ms
            .iter()
            .enumerate()
            .map(|(i, &m)| SweepRow {
                index: vec![i],
                params: vec![],
                seed: 0,
                m_star: vec![m],
                residual: 0.0,
                mean_state: m,
                var_state: 0.0,
                revenue: None,
                converged: true,
                seconds: 0.0,
                error: None,
                solution: None,
            })
            .collect();
        SweepResult { param_names: vec!["p".into()], rows }
    }

    #[test]
    fn constant_metric_passes_both_ways() {
        let r = result(&[2.0, 2.0, 2.0]);
        assert!(monotonicity_check(&r, Metric::MStar, Direction::Nondecreasing, 0.0).passed);
        assert!(monotonicity_check(&r, Metric::MStar, Direction::Nonincreasing, 0.0).passed);
    }

    #[test]
    fn dips_within_tolerance_pass_and_beyond_fail() {
        let r = result(&[1.0, 0.9995, 2.0]);
        assert!(monotonicity_check(&r, Metric::MStar, Direction::Nondecreasing, EXACT_TOL).passed);
        let rep = monotonicity_check(&r, Metric::MStar, Direction::Nondecreasing, 1e-4);
        assert_eq!(rep.violations, vec![(0, 1, 1.0, 0.9995)]);
    }

    #[test]
    fn missing_values_fail() {
        let r = result(&[1.0, f64::NAN]);
        assert!(!monotonicity_check(&r, Metric::MStar, Direction::Nondecreasing, 1.0).passed);
        assert!(!monotonicity_check(&r, Metric::Revenue, Direction::Nondecreasing, 1.0).passed);
    }
}
