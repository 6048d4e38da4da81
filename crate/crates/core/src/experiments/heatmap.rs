use std::path::Path;

use toml::Value;

use super::svg::render_heatmap_svg;
use super::sweep::{comparative_statics_sweep, SweepGrid, SweepResult};
use crate::config::{AxisSpec, ConfigError, RunConfig};
use crate::equilibrium::Algorithm;
use crate::io::{fmt_sig, IoError};

/// Platform revenue over a (holding cost × revenue share) grid.
#[derive(Debug, Clone)]
pub struct HeatmapResult {
    pub h_values: Vec<f64>,
    pub tau_values: Vec<f64>,
    pub sweep: SweepResult,
}

impl HeatmapResult {
    /// Interpret a two-axis sweep as a heatmap: first axis rows, second
    /// columns.
    pub fn from_sweep(grid: &SweepGrid, sweep: SweepResult) -> Result<Self, ConfigError> {
        let bad = |m: &str| ConfigError::Section { section: "sweep".into(), message: m.into() };
        if grid.axes.len() != 2 {
            return Err(bad("heatmap mode needs exactly two axes"));
        }
        let nums = |a: &AxisSpec| {
            a.values
                .iter()
                .map(|v| match v {
                    Value::Float(f) => Ok(*f),
                    Value::Integer(i) => Ok(*i as f64),
                    _ => Err(bad("heatmap axes must be numeric")),
                })
                .collect::<Result<Vec<_>, _>>()
        };
        Ok(Self { h_values: nums(&grid.axes[0])?, tau_values: nums(&grid.axes[1])?, sweep })
    }

    /// Revenue matrix, rows = h, columns = τ; NaN where a cell failed.
    pub fn matrix(&self) -> Vec<Vec<f64>> {
        let cols = self.tau_values.len();
        self.h_values
            .iter()
            .enumerate()
            .map(|(i, _)| (0..cols).map(|j| self.sweep.rows[i * cols + j].revenue.unwrap_or(f64::NAN)).collect())
            .collect()
    }

    /// Mean revenue over the cells whose (h, τ) satisfy `keep`.
    pub fn region_mean(&self, keep: impl Fn(f64, f64) -> bool) -> f64 {
        let m = self.matrix();
        let mut vals = Vec::new();
        for (i, &h) in self.h_values.iter().enumerate() {
            for (j, &t) in self.tau_values.iter().enumerate() {
                if keep(h, t) {
                    vals.push(m[i][j]);
                }
            }
        }
        vals.iter().sum::<f64>() / vals.len() as f64
    }

    pub fn matrix_csv(&self) -> String {
        let mut out = String::from("h\\tau");
        for t in &self.tau_values {
            out.push(',');
            out.push_str(&fmt_sig(*t));
        }
        out.push('\n');
        for (h, row) in self.h_values.iter().zip(self.matrix()) {
            out.push_str(&fmt_sig(*h));
            for v in row {
                out.push(',');
                out.push_str(&fmt_sig(v));
            }
            out.push('\n');
        }
        out
    }

    pub fn svg(&self) -> String {
        let rows: Vec<String> = self.h_values.iter().map(|h| fmt_sig(*h)).collect();
        let cols: Vec<String> = self.tau_values.iter().map(|t| fmt_sig(*t)).collect();
        render_heatmap_svg(&self.matrix(), &rows, &cols, "holding cost h", "revenue share τ", "platform revenue")
    }

    pub fn write(&self, matrix_path: &Path, svg_path: Option<&Path>) -> Result<(), IoError> {
        let write = |p: &Path, s: String| std::fs::write(p, s).map_err(|source| IoError::File { path: p.display().to_string(), source });
        write(matrix_path, self.matrix_csv())?;
        if let Some(p) = svg_path {
            write(p, self.svg())?;
        }
        Ok(())
    }
}

/// Inventory equilibria over every (h, τ) pair of the grid with the
/// platform's revenue per cell. `base` must be an inventory configuration.
pub fn revenue_heatmap(
    h_values: &[f64],
    tau_values: &[f64],
    base: &RunConfig,
    algorithm: Algorithm,
    base_seed: u64,
    workers: usize,
) -> Result<HeatmapResult, ConfigError> {
    if base.model_name() != "inventory" {
        return Err(ConfigError::Section { section: "sweep".into(), message: "the revenue heatmap needs the inventory model".into() });
    }
    let axis = |param: &str, v: &[f64]| AxisSpec { param: param.into(), values: v.iter().map(|&x| Value::Float(x)).collect() };
    let grid = SweepGrid::new(base.clone(), vec![axis("holding_cost", h_values), axis("revenue_share", tau_values)], algorithm, base_seed)?;
    let sweep = comparative_statics_sweep(&grid, workers);
    HeatmapResult::from_sweep(&grid, sweep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{platform_revenue, InventoryParams};

    #[test]
    fn full_commission_column_is_zero_and_layout_is_h_by_tau() {
        let base = RunConfig::for_model("inventory").unwrap();
        let hm = revenue_heatmap(&[2.0, 8.0], &[0.5, 1.0], &base, Algorithm::Vfi, 0, 2).unwrap();
        let m = hm.matrix();
        assert_eq!((m.len(), m[0].len()), (2, 2));
        // τ = 1: the commission term vanishes, only the holding fee is left.
        for i in 0..2 {
            let sol = hm.sweep.rows[i * 2 + 1].solution.as_ref().unwrap();
            let p = InventoryParams { revenue_share: 1.0, holding_cost: 0.0, ..Default::default() };
            assert!(platform_revenue(sol, &p).abs() < 1e-12);
            assert!(m[i][1] >= 0.0);
        }
        assert!(m[0][0] > 0.0);
        assert!(hm.matrix_csv().starts_with("h\\tau,0.5,1\n2,"));
        assert!(hm.svg().starts_with("<svg"));
    }
}
