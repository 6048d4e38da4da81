//! Social learning with costly private signals.
//!
//! An agent's belief x moves to the grid point nearest
//! `c(1−k)x + (1−c)(1−k)m + kζ` where `k = k(a)` weights a private signal
//! `ζ ~ N(θ, 1/(3 + γa))` bought with effort a, and m is the population's
//! mean belief. Payoff penalises distance from the truth and effort.

use std::sync::Arc;

use rand::RngCore;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal as StatNormal};

use super::{check, snap_to_grid};
use crate::model::{
    ActionSpace, Dynamics, ModelError, ModelSpec, PopulationState, ScalarBounds, SparseRow, StateSpace, StationaryPolicy,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SocialLearningParams {
    pub grid_points: usize,
    pub max_effort: usize,
    pub truth: f64,
    pub self_weight: f64,
    pub precision: f64,
    pub loss_scale: f64,
    pub effort_cost: f64,
    pub discount: f64,
}

impl Default for SocialLearningParams {
    fn default() -> Self {
        Self {
            grid_points: 21,
            max_effort: 5,
            truth: 0.4,
            self_weight: 0.4,
            precision: 5.0,
            loss_scale: 20.0,
            effort_cost: 0.1,
            discount: 0.95,
        }
    }
}

impl SocialLearningParams {
    fn validate(&self) -> Result<(), ModelError> {
        check(self.self_weight > 0.0 && self.self_weight < 1.0, || "self_weight must lie in (0,1)".into())?;
        check(self.precision > 0.0, || "precision must be positive".into())?;
        check(self.grid_points >= 2, || "belief grid needs at least two points".into())?;
        check((0.0..=1.0).contains(&self.truth), || "truth must lie in [0,1]".into())?;
        check(self.discount > 0.0 && self.discount < 1.0, || "discount must lie in (0,1)".into())
    }

    pub fn step(&self) -> f64 {
        1.0 / (self.grid_points - 1) as f64
    }

    pub fn signal_weight(a: f64) -> f64 {
        (0.5 + a) / (1.5 + a)
    }

    pub fn signal_variance(&self, a: f64) -> f64 {
        1.0 / (3.0 + self.precision * a)
    }
}

struct SocialLearning {
    p: SocialLearningParams,
    grid: Vec<f64>,
    /// Cell boundaries: midpoints between neighbouring grid points.
    edges: Vec<f64>,
}

impl SocialLearning {
    /// Deterministic part of the update and the std. dev. of `kζ`.
    fn update(&self, x: usize, a: usize, m: f64) -> (f64, f64, f64) {
        let af = a as f64;
        let k = SocialLearningParams::signal_weight(af);
        let c = self.p.self_weight;
        let drift = c * (1.0 - k) * self.grid[x] + (1.0 - c) * (1.0 - k) * m;
        (drift, k, k * self.p.signal_variance(af).sqrt())
    }
}

impl Dynamics for SocialLearning {
    fn payoff(&self, x: usize, a: usize, _m: &[f64]) -> f64 {
        -self.p.loss_scale * (self.p.truth - self.grid[x]).powi(2) - self.p.effort_cost * a as f64
    }

    fn transition_row(&self, x: usize, a: usize, m: &[f64]) -> SparseRow {
        let (drift, k, sd) = self.update(x, a, m[0]);
        let mean = drift + k * self.p.truth;
        if sd == 0.0 {
            return vec![(snap_to_grid(mean, self.p.step(), self.grid.len()), 1.0)];
        }
        let law = StatNormal::new(mean, sd).expect("positive sd");
        let mut row = Vec::with_capacity(self.grid.len());
        let mut below = 0.0;
        for (y, edge) in self.edges.iter().enumerate() {
            let cdf = law.cdf(*edge);
            row.push((y, cdf - below));
            below = cdf;
        }
        row.push((self.grid.len() - 1, 1.0 - below));
        row
    }

    fn sample_transition(&self, x: usize, a: usize, m: &[f64], rng: &mut dyn RngCore) -> usize {
        let (drift, k, _) = self.update(x, a, m[0]);
        let signal = Normal::new(self.p.truth, self.p.signal_variance(a as f64).sqrt()).expect("positive variance");
        let zeta: f64 = signal.sample(rng);
        snap_to_grid(drift + k * zeta, self.p.step(), self.grid.len())
    }

    fn interaction(&self, s: &PopulationState, _g: &StationaryPolicy, _m: &[f64]) -> Vec<f64> {
        vec![s.mean_of(&self.grid)]
    }
}

pub fn build_social_learning_model(p: &SocialLearningParams) -> Result<ModelSpec, ModelError> {
    p.validate()?;
    let n = p.grid_points;
    let grid: Vec<f64> = (0..n).map(|i| i as f64 * p.step()).collect();
    let edges = grid.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    let labels = grid.iter().map(|g| format!("{g:.2}")).collect();
    let states = StateSpace::from_labels(labels)?.with_values(grid.clone());
    let actions = ActionSpace::unrestricted((0..=p.max_effort).map(|a| a as f64).collect(), n);
    ModelSpec::new(
        "social-learning",
        states,
        actions,
        p.discount,
        ScalarBounds::scalar(0.0, 1.0)?,
        Arc::new(SocialLearning { p: p.clone(), grid, edges }),
    )
}
