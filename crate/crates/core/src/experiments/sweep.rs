use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use toml::Value;

use crate::config::{AxisSpec, ConfigError, RunConfig};
use crate::equilibrium::{Algorithm, MfeSolution};
use crate::io::{fmt_sig, IoError};
use crate::models::{platform_revenue, ModelParams};
use crate::runner;
use crate::seed;

/// Cartesian grid of parameter overrides on top of a base configuration.
#[derive(Debug, Clone)]
pub struct SweepGrid {
    pub base: RunConfig,
    pub axes: Vec<AxisSpec>,
    pub algorithm: Algorithm,
    pub base_seed: u64,
}

impl SweepGrid {
    pub fn new(base: RunConfig, axes: Vec<AxisSpec>, algorithm: Algorithm, base_seed: u64) -> Result<Self, ConfigError> {
        let grid = Self { base, axes, algorithm, base_seed };
        grid.validate()?;
        Ok(grid)
    }

    /// Grid from the config's `[sweep]` section; algorithm and seed fall back
    /// to the top-level ones.
    pub fn from_config(cfg: &RunConfig) -> Result<Self, ConfigError> {
        let spec = cfg.sweep.clone().ok_or_else(|| ConfigError::Missing("sweep".into()))?;
        Self::new(cfg.clone(), spec.axes, spec.algorithm.unwrap_or(cfg.algorithm), spec.base_seed.unwrap_or(cfg.seed))
    }

    /// Non-empty axes whose every value resolves against the base config.
    fn validate(&self) -> Result<(), ConfigError> {
        let bad = |message: String| ConfigError::Section { section: "sweep".into(), message };
        if self.axes.is_empty() {
            return Err(bad("no axes".into()));
        }
        for axis in &self.axes {
            if axis.values.is_empty() {
                return Err(bad(format!("axis '{}' has no values", axis.param)));
            }
            for v in &axis.values {
                self.base.with_overrides(&[(axis.param.clone(), v.clone())])?;
            }
        }
        Ok(())
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.values.len()).collect()
    }

    pub fn len(&self) -> usize {
        self.shape().iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Row-major cell indices, first axis slowest.
    pub fn cells(&self) -> Vec<Vec<usize>> {
        let shape = self.shape();
        (0..self.len())
            .map(|mut flat| {
                let mut idx = vec![0; shape.len()];
                for d in (0..shape.len()).rev() {
                    idx[d] = flat % shape[d];
                    flat /= shape[d];
                }
                idx
            })
            .collect()
    }

    /// Seed of a cell: a function of the base seed and the cell's own
    /// `(parameter, value)` pairs, so neither execution order nor the order
    /// of values along an axis changes any cell's result.
    pub fn cell_seed(&self, index: &[usize]) -> u64 {
        let keys: Vec<u64> = index
            .iter()
            .zip(&self.axes)
            .map(|(&i, a)| fnv1a(format!("{}={}", a.param, a.values[i]).as_bytes()))
            .collect();
        seed::derive_seed(self.base_seed, &keys)
    }

    pub fn param_names(&self) -> Vec<String> {
        self.axes.iter().map(|a| a.param.clone()).collect()
    }
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub index: Vec<usize>,
    pub params: Vec<Value>,
    pub seed: u64,
    /// NaN-filled when the cell failed.
    pub m_star: Vec<f64>,
    pub residual: f64,
    pub mean_state: f64,
    pub var_state: f64,
    /// Platform revenue (inventory cells only).
    pub revenue: Option<f64>,
    pub converged: bool,
    pub seconds: f64,
    pub error: Option<String>,
    pub solution: Option<MfeSolution>,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub param_names: Vec<String>,
    pub rows: Vec<SweepRow>,
}

/// Stable 64-bit FNV-1a (std's hasher is not guaranteed stable across
/// releases).
fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ *b as u64).wrapping_mul(0x0100_0000_01b3))
}

fn fmt_value(v: &Value) -> String {
    match v {
        Value::Float(f) => fmt_sig(*f),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

impl SweepResult {
    /// CSV text; `with_timing = false` blanks the wall-time column so that
    /// repeated runs compare byte for byte.
    pub fn to_csv(&self, with_timing: bool) -> String {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        let mut header = self.param_names.clone();
        header.extend(["m_star", "residual", "mean_state", "var_state", "revenue", "converged", "seconds"].map(String::from));
        w.write_record(&header).expect("in-memory write");
        for row in &self.rows {
            let mut rec: Vec<String> = row.params.iter().map(fmt_value).collect();
            rec.push(row.m_star.iter().map(|v| fmt_sig(*v)).collect::<Vec<_>>().join(";"));
            rec.push(fmt_sig(row.residual));
            rec.push(fmt_sig(row.mean_state));
            rec.push(fmt_sig(row.var_state));
            rec.push(row.revenue.map(fmt_sig).unwrap_or_default());
            rec.push(row.converged.to_string());
            rec.push(if with_timing { fmt_sig(row.seconds) } else { String::new() });
            w.write_record(&rec).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
    }

    pub fn write_csv(&self, path: &Path, with_timing: bool) -> Result<(), IoError> {
        std::fs::write(path, self.to_csv(with_timing)).map_err(|source| IoError::File { path: path.display().to_string(), source })
    }

    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| r.error.is_some()).count()
    }
}

fn run_cell(grid: &SweepGrid, index: Vec<usize>) -> SweepRow {
    let start = Instant::now();
    let params: Vec<Value> = index.iter().zip(&grid.axes).map(|(&i, a)| a.values[i].clone()).collect();
    let seed = grid.cell_seed(&index);
    let overrides: Vec<(String, Value)> = grid.axes.iter().map(|a| a.param.clone()).zip(params.iter().cloned()).collect();
    let dim = grid.base.params.build().map(|m| m.bounds.dim()).unwrap_or(1);
    let mut row = SweepRow {
        index,
        params,
        seed,
        m_star: vec![f64::NAN; dim],
        residual: f64::NAN,
        mean_state: f64::NAN,
        var_state: f64::NAN,
        revenue: None,
        converged: false,
        seconds: 0.0,
        error: None,
        solution: None,
    };
    let outcome = grid
        .base
        .with_overrides(&overrides)
        .map_err(runner::RunError::from)
        .and_then(|cfg| runner::solve(&cfg, grid.algorithm, seed).map(|out| (cfg, out)));
    match outcome {
        Ok((cfg, out)) => {
            let sol = out.solution;
            let values = out.model.states.values();
            row.m_star = sol.m_star.clone();
            row.residual = sol.residual;
            row.mean_state = sol.population.mean_of(values);
            row.var_state = sol.population.variance_of(values);
            if let ModelParams::Inventory(p) = &cfg.params {
                row.revenue = Some(platform_revenue(&sol, p));
            }
            row.converged = sol.converged;
            row.solution = Some(sol);
        }
        Err(e) => {
            log::error!("sweep cell {:?} failed: {e}", row.index);
            row.error = Some(e.to_string());
        }
    }
    row.seconds = start.elapsed().as_secs_f64();
    row
}

/// Solves every cell of `grid` on up to `workers` threads. Rows come back
/// in grid order; a failing cell yields a flagged row and the sweep goes on.
pub fn comparative_statics_sweep(grid: &SweepGrid, workers: usize) -> SweepResult {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(workers.max(1)).build().expect("thread pool");
    let rows = pool.install(|| grid.cells().into_par_iter().map(|idx| run_cell(grid, idx)).collect());
    SweepResult { param_names: grid.param_names(), rows }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::adaptive_vfi;
    use crate::models::{build_ridesharing_model, RidesharingParams};

    fn axis(param: &str, values: Vec<Value>) -> AxisSpec {
        AxisSpec { param: param.into(), values }
    }

    #[test]
    fn cells_are_row_major() {
        let base = RunConfig::for_model("ridesharing").unwrap();
        let g = SweepGrid::new(
            base,
            vec![axis("r_long", vec![Value::Float(5.0), Value::Float(10.0)]), axis("discount", vec![0.9.into(), 0.95.into(), 0.99.into()])],
            Algorithm::Vfi,
            0,
        )
        .unwrap();
        assert_eq!(g.len(), 6);
        assert_eq!(g.cells()[4], vec![1, 1]);
        assert_ne!(g.cell_seed(&[0, 1]), g.cell_seed(&[1, 0]));
    }

    #[test]
    fn unknown_parameter_is_rejected() {
        let base = RunConfig::for_model("ridesharing").unwrap();
        assert!(SweepGrid::new(base.clone(), vec![axis("nope", vec![1.into()])], Algorithm::Vfi, 0).is_err());
        assert!(SweepGrid::new(base, vec![axis("r_long", vec![])], Algorithm::Vfi, 0).is_err());
    }

    #[test]
    fn singleton_grid_matches_direct_solve() {
        let base = RunConfig::for_model("ridesharing").unwrap();
        let g = SweepGrid::new(base, vec![axis("r_long", vec![Value::Float(5.0)])], Algorithm::Vfi, 0).unwrap();
        let res = comparative_statics_sweep(&g, 1);
        let direct = adaptive_vfi(&build_ridesharing_model(&RidesharingParams { r_long: 5.0, ..Default::default() }).unwrap(), &Default::default()).unwrap();
        assert_eq!(res.rows.len(), 1);
        assert_eq!(res.rows[0].m_star, direct.m_star);
        assert!(res.rows[0].converged);
        assert!(res.to_csv(false).starts_with("r_long,m_star,residual,"));
    }

    #[test]
    fn failing_cell_is_flagged_not_fatal() {
        let base = RunConfig::for_model("ridesharing").unwrap();
        // Built directly: validation would reject the second cell up front.
        let g = SweepGrid { base, axes: vec![axis("discount", vec![0.95.into(), 1.5.into()])], algorithm: Algorithm::Vfi, base_seed: 0 };
        let res = comparative_statics_sweep(&g, 2);
        assert_eq!(res.rows.len(), 2);
        assert!(res.rows[0].converged && res.rows[0].error.is_none());
        assert!(!res.rows[1].converged && res.rows[1].error.is_some());
        assert_eq!(res.failures(), 1);
    }
}
