//! Capacity competition and the quality ladder.
//!
//! Both share the investment dynamics: with investment a a firm moves up
//! one level w.p. `(1−δ)a/(1+a)`, down one w.p. `δ/(1+a)`, otherwise stays.
//! Down-moves at level 0 and up-moves at the top level stay put.

use std::sync::Arc;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::check;
use crate::model::{
    ActionSpace, Dynamics, ModelError, ModelSpec, PopulationState, ScalarBounds, SparseRow, StateSpace, StationaryPolicy,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CapacityParams {
    pub max_state: usize,
    pub action_step: f64,
    pub n_actions: usize,
    pub depreciation: f64,
    pub cost_scale: f64,
    pub cost_power: f64,
    pub alpha: f64,
    pub slope: f64,
    pub discount: f64,
}

impl Default for CapacityParams {
    fn default() -> Self {
        Self {
            max_state: 39,
            action_step: 0.05,
            n_actions: 20,
            depreciation: 0.51,
            cost_scale: 150.0,
            cost_power: 3.0,
            alpha: 45.0,
            slope: 1.0,
            discount: 0.98,
        }
    }
}

impl CapacityParams {
    fn validate(&self) -> Result<(), ModelError> {
        check(self.depreciation > 0.0 && self.depreciation < 1.0, || "depreciation must lie in (0,1)".into())?;
        check(self.max_state >= 1 && self.n_actions >= 1, || "need at least two states and one action".into())?;
        check(self.action_step > 0.0 && self.action_step * self.n_actions as f64 <= 1.0 + 1e-12, || {
            "investment grid must lie in (0,1]".into()
        })?;
        check(self.discount > 0.0 && self.discount < 1.0, || "discount must lie in (0,1)".into())
    }

    fn actions(&self) -> Vec<f64> {
        (1..=self.n_actions).map(|i| i as f64 * self.action_step).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Flavor {
    Capacity { alpha: f64, slope: f64 },
    QualityLadder { scale: f64, theta: f64 },
    /// Capacity payoff with the two-moment interaction (mean, mean x²/top).
    Capacity2d { alpha: f64, slope: f64 },
}

struct Investment {
    top: usize,
    depreciation: f64,
    actions: Vec<f64>,
    cost_scale: f64,
    cost_power: f64,
    flavor: Flavor,
}

impl Investment {
    fn cost(&self, a: usize) -> f64 {
        self.cost_scale * self.actions[a].powf(self.cost_power)
    }

    fn probs(&self, a: usize) -> (f64, f64) {
        let inv = self.actions[a];
        ((1.0 - self.depreciation) * inv / (1.0 + inv), self.depreciation / (1.0 + inv))
    }
}

impl Dynamics for Investment {
    fn payoff(&self, x: usize, a: usize, m: &[f64]) -> f64 {
        let x = x as f64;
        let revenue = match self.flavor {
            Flavor::Capacity { alpha, slope } | Flavor::Capacity2d { alpha, slope } => x * (alpha - slope * m[0]),
            Flavor::QualityLadder { scale, theta } => scale * (x + 1.0).powf(theta) / m[0],
        };
        revenue - self.cost(a)
    }

    fn transition_row(&self, x: usize, a: usize, _m: &[f64]) -> SparseRow {
        let (up, down) = self.probs(a);
        if x == 0 {
            vec![(0, 1.0 - up), (1, up)]
        } else if x == self.top {
            vec![(x - 1, down), (x, 1.0 - down)]
        } else {
            vec![(x - 1, down), (x, 1.0 - up - down), (x + 1, up)]
        }
    }

    fn sample_transition(&self, x: usize, a: usize, _m: &[f64], rng: &mut dyn RngCore) -> usize {
        let inv = self.actions[a];
        let success = rng.random::<f64>() < inv / (1.0 + inv);
        let depreciated = rng.random::<f64>() < self.depreciation;
        match (success, depreciated) {
            (true, false) => (x + 1).min(self.top),
            (false, true) => x.saturating_sub(1),
            _ => x,
        }
    }

    fn interaction(&self, s: &PopulationState, _g: &StationaryPolicy, _m: &[f64]) -> Vec<f64> {
        let p = s.probs();
        match self.flavor {
            Flavor::Capacity { .. } => vec![p.iter().enumerate().map(|(x, w)| x as f64 * w).sum()],
            Flavor::QualityLadder { theta, .. } => {
                vec![p.iter().enumerate().map(|(x, w)| (x as f64 + 1.0).powf(theta) * w).sum()]
            }
            Flavor::Capacity2d { .. } => {
                let top = self.top as f64;
                vec![
                    p.iter().enumerate().map(|(x, w)| x as f64 * w).sum(),
                    p.iter().enumerate().map(|(x, w)| (x * x) as f64 / top * w).sum(),
                ]
            }
        }
    }
}

fn build(name: &str, p: &CapacityParams, flavor: Flavor, bounds: ScalarBounds) -> Result<ModelSpec, ModelError> {
    p.validate()?;
    let n = p.max_state + 1;
    let actions = p.actions();
    let dynamics = Investment {
        top: p.max_state,
        depreciation: p.depreciation,
        actions: actions.clone(),
        cost_scale: p.cost_scale,
        cost_power: p.cost_power,
        flavor,
    };
    ModelSpec::new(name, StateSpace::indexed(n)?, ActionSpace::unrestricted(actions, n), p.discount, bounds, Arc::new(dynamics))
}

/// Payoff `x(α − slope·m) − c(a)`, interaction = mean capacity.
pub fn build_capacity_model(p: &CapacityParams) -> Result<ModelSpec, ModelError> {
    let top = p.max_state as f64;
    build("capacity", p, Flavor::Capacity { alpha: p.alpha, slope: p.slope }, ScalarBounds::scalar(0.0, top)?)
}

/// The capacity game with interaction `(mean x, mean x²/top)`. The second
/// coordinate never enters the payoff.
pub fn build_capacity_2d_model(p: &CapacityParams) -> Result<ModelSpec, ModelError> {
    let top = p.max_state as f64;
    build(
        "capacity-2d",
        p,
        Flavor::Capacity2d { alpha: p.alpha, slope: p.slope },
        ScalarBounds::boxed(vec![0.0, 0.0], vec![top, top])?,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QualityLadderParams {
    pub max_state: usize,
    pub action_step: f64,
    pub n_actions: usize,
    pub depreciation: f64,
    pub cost_scale: f64,
    pub cost_power: f64,
    pub discount: f64,
    pub scale: f64,
    pub theta: f64,
}

impl Default for QualityLadderParams {
    fn default() -> Self {
        let c = CapacityParams::default();
        Self {
            max_state: c.max_state,
            action_step: c.action_step,
            n_actions: c.n_actions,
            depreciation: c.depreciation,
            cost_scale: c.cost_scale,
            cost_power: c.cost_power,
            discount: c.discount,
            scale: 1.0,
            theta: 1.0,
        }
    }
}

impl QualityLadderParams {
    fn dynamics(&self) -> CapacityParams {
        CapacityParams {
            max_state: self.max_state,
            action_step: self.action_step,
            n_actions: self.n_actions,
            depreciation: self.depreciation,
            cost_scale: self.cost_scale,
            cost_power: self.cost_power,
            discount: self.discount,
            ..CapacityParams::default()
        }
    }
}

/// Payoff `c̃(x+1)^θ / m − c(a)`, interaction `Σ (y+1)^θ s(y)`.
pub fn build_quality_ladder_model(p: &QualityLadderParams) -> Result<ModelSpec, ModelError> {
    check(p.scale > 0.0 && p.theta > 0.0, || "scale and theta must be positive".into())?;
    let hi = (p.max_state as f64 + 1.0).powf(p.theta);
    build(
        "quality-ladder",
        &p.dynamics(),
        Flavor::QualityLadder { scale: p.scale, theta: p.theta },
        ScalarBounds::scalar(1.0, hi)?,
    )
}
