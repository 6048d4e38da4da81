//! Seller reputation on a review platform.
//!
//! State `(x₁, x₂)`: rank on a half-point grid and review count (capped).
//! Investing a raises the expected next review; the rank moves to the
//! rounded running average `(x₂/(1+x₂))x₁ + aζ/(1+x₂)`.
//!
//! The discount doubles as the probability of staying on the platform, so
//! the population chain replaces a leaving seller by a fresh one at (0, 0).
//! Without that renewal every seller eventually freezes at the review cap
//! and the population chain has many closed classes.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{check, snap_to_grid};
use crate::model::{
    ActionSpace, Dynamics, ModelError, ModelSpec, PopulationState, Renewal, ScalarBounds, SparseRow, StateSpace,
    StationaryPolicy,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReputationParams {
    pub rank_step: f64,
    pub max_rank: f64,
    pub max_reviews: usize,
    pub max_effort: usize,
    pub review_shocks: Vec<f64>,
    pub effort_cost: f64,
    pub discount: f64,
    /// Per-period probability that a seller leaves and is replaced by a
    /// newcomer; 0 disables renewal.
    pub exit_rate: f64,
}

impl Default for ReputationParams {
    fn default() -> Self {
        Self {
            rank_step: 0.5,
            max_rank: 5.0,
            max_reviews: 20,
            max_effort: 2,
            review_shocks: vec![1.0, 1.5, 2.0, 2.25, 2.5],
            effort_cost: 0.25,
            discount: 0.95,
            exit_rate: 0.05,
        }
    }
}

impl ReputationParams {
    fn validate(&self) -> Result<(), ModelError> {
        check(self.effort_cost >= 0.0, || "effort_cost must be non-negative".into())?;
        check(self.rank_step > 0.0 && self.max_rank > 0.0, || "rank grid must be positive".into())?;
        check(!self.review_shocks.is_empty(), || "review_shocks must not be empty".into())?;
        check((0.0..1.0).contains(&self.exit_rate), || "exit_rate must lie in [0,1)".into())?;
        check(self.discount > 0.0 && self.discount < 1.0, || "discount must lie in (0,1)".into())
    }

    pub fn rank_points(&self) -> usize {
        (self.max_rank / self.rank_step).round() as usize + 1
    }

    pub fn interaction_hi(&self) -> f64 {
        1.0 + 3.0 * self.max_rank + self.max_reviews as f64
    }
}

struct Reputation {
    p: ReputationParams,
    ranks: usize,
    width: usize,
}

impl Reputation {
    fn decode(&self, x: usize) -> (f64, usize) {
        ((x / self.width) as f64 * self.p.rank_step, x % self.width)
    }

    fn weight(x: usize, width: usize, step: f64) -> f64 {
        1.0 + 3.0 * (x / width) as f64 * step + (x % width) as f64
    }
}

impl Dynamics for Reputation {
    fn payoff(&self, x: usize, a: usize, m: &[f64]) -> f64 {
        Self::weight(x, self.width, self.p.rank_step) / m[0] - self.p.effort_cost * a as f64
    }

    fn transition_row(&self, x: usize, a: usize, _m: &[f64]) -> SparseRow {
        let (rank, reviews) = self.decode(x);
        let n = reviews as f64;
        let next_reviews = (reviews + 1).min(self.p.max_reviews);
        let w = 1.0 / self.p.review_shocks.len() as f64;
        let mut row: SparseRow = Vec::new();
        for &z in &self.p.review_shocks {
            let average = n / (1.0 + n) * rank + a as f64 * z / (1.0 + n);
            let y = snap_to_grid(average, self.p.rank_step, self.ranks) * self.width + next_reviews;
            match row.iter_mut().find(|(t, _)| *t == y) {
                Some(entry) => entry.1 += w,
                None => row.push((y, w)),
            }
        }
        row
    }

    fn interaction(&self, s: &PopulationState, _g: &StationaryPolicy, _m: &[f64]) -> Vec<f64> {
        let total = s
            .probs()
            .iter()
            .enumerate()
            .map(|(x, sx)| sx * Self::weight(x, self.width, self.p.rank_step))
            .sum();
        vec![total]
    }
}

pub fn build_reputation_model(p: &ReputationParams) -> Result<ModelSpec, ModelError> {
    p.validate()?;
    let ranks = p.rank_points();
    let width = p.max_reviews + 1;
    let step = p.rank_step;
    let states = StateSpace::product(&[ranks, width], |c| format!("({},{})", c[0] as f64 * step, c[1]))?;
    let values = (0..states.len()).map(|x| (x / width) as f64 * step).collect();
    let states = states.with_values(values);
    let n = states.len();
    let model = ModelSpec::new(
        "reputation",
        states,
        ActionSpace::unrestricted((0..=p.max_effort).map(|a| a as f64).collect(), n),
        p.discount,
        ScalarBounds::scalar(1.0, p.interaction_hi())?,
        Arc::new(Reputation { p: p.clone(), ranks, width }),
    )?;
    Ok(if p.exit_rate > 0.0 { model.with_renewal(Renewal { rate: p.exit_rate, state: 0 }) } else { model })
}
