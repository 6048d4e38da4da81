//! Batch comparative statics: parameter sweeps, the platform-revenue
//! heatmap and empirical monotonicity checks.

pub mod heatmap;
pub mod monotonicity;
pub mod svg;
pub mod sweep;

pub use heatmap::{revenue_heatmap, HeatmapResult};
pub use monotonicity::{monotonicity_check, Direction, Metric, MonotonicityReport, EXACT_TOL, LEARNED_TOL};
pub use svg::render_heatmap_svg;
pub use sweep::{comparative_statics_sweep, SweepGrid, SweepResult, SweepRow};
