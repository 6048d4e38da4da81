//! Drivers choosing which ride requests to accept.
//!
//! State `(x₁, x₂)`: x₁ is the remaining trip time (0 = available), x₂ the
//! request type just received (0 = none). Accepting type j sets `x₁' = d_j`
//! and x₁ then counts down by one per period, so a trip of length d blocks
//! d decision periods. A fresh request type is drawn every period:
//! none with probability m (the available fraction), otherwise type j with
//! probability `(1 − m)/K`.

use std::sync::Arc;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::check;
use crate::model::{
    ActionSpace, Dynamics, ModelError, ModelSpec, PopulationState, ScalarBounds, SparseRow, StateSpace, StationaryPolicy,
};

pub const REJECT: usize = 0;
pub const ACCEPT: usize = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RidesharingParams {
    /// Trip length of each request type, each in `1..=max_duration`.
    pub durations: Vec<usize>,
    pub max_duration: usize,
    /// Payoffs of the shorter request types.
    pub payoffs: Vec<f64>,
    /// Payoff of the longest request type.
    pub r_long: f64,
    pub discount: f64,
}

impl Default for RidesharingParams {
    fn default() -> Self {
        Self { durations: vec![1, 2, 3], max_duration: 3, payoffs: vec![1.0, 1.3], r_long: 10.0, discount: 0.95 }
    }
}

impl RidesharingParams {
    fn validate(&self) -> Result<(), ModelError> {
        check(!self.durations.is_empty(), || "need at least one request type".into())?;
        check(self.durations.iter().all(|&d| d >= 1 && d <= self.max_duration), || {
            "every duration must lie in 1..=max_duration".into()
        })?;
        check(self.payoffs.len() + 1 == self.durations.len(), || {
            "payoffs lists every request type but the last (whose payoff is r_long)".into()
        })?;
        check(self.discount > 0.0 && self.discount < 1.0, || "discount must lie in (0,1)".into())
    }

    /// Reward of each request type, index 0 = no request.
    pub fn rewards(&self) -> Vec<f64> {
        let mut u = vec![0.0];
        u.extend(&self.payoffs);
        u.push(self.r_long);
        u
    }
}

struct Ridesharing {
    types: usize,
    rewards: Vec<f64>,
    durations: Vec<usize>,
    width: usize,
}

impl Ridesharing {
    fn decode(&self, x: usize) -> (usize, usize) {
        (x / self.width, x % self.width)
    }

    fn next_clock(&self, x: usize, a: usize) -> usize {
        let (x1, x2) = self.decode(x);
        if a == ACCEPT { self.durations[x2 - 1] } else { x1.saturating_sub(1) }
    }

    fn request_law(&self, m: f64) -> Vec<f64> {
        let mut q = vec![(1.0 - m) / self.types as f64; self.types + 1];
        q[0] = m;
        q
    }
}

impl Dynamics for Ridesharing {
    fn payoff(&self, x: usize, a: usize, _m: &[f64]) -> f64 {
        if a == ACCEPT { self.rewards[self.decode(x).1] } else { 0.0 }
    }

    fn transition_row(&self, x: usize, a: usize, m: &[f64]) -> SparseRow {
        let clock = self.next_clock(x, a);
        self.request_law(m[0]).into_iter().enumerate().map(|(j, q)| (clock * self.width + j, q)).collect()
    }

    fn sample_transition(&self, x: usize, a: usize, m: &[f64], rng: &mut dyn RngCore) -> usize {
        let clock = self.next_clock(x, a);
        let u: f64 = rng.random();
        let request = if u < m[0] {
            0
        } else {
            (1 + ((u - m[0]) / (1.0 - m[0]) * self.types as f64) as usize).min(self.types)
        };
        clock * self.width + request
    }

    /// Fraction of available drivers.
    fn interaction(&self, s: &PopulationState, _g: &StationaryPolicy, _m: &[f64]) -> Vec<f64> {
        vec![s.probs()[..self.width].iter().sum()]
    }
}

pub fn build_ridesharing_model(p: &RidesharingParams) -> Result<ModelSpec, ModelError> {
    p.validate()?;
    let types = p.durations.len();
    let width = types + 1;
    let states = StateSpace::product(&[p.max_duration + 1, width], |c| format!("({},{})", c[0], c[1]))?;
    let values = (0..states.len()).map(|x| (x / width) as f64).collect();
    let states = states.with_values(values);
    let feasible = (0..states.len())
        .map(|x| if x / width == 0 && x % width != 0 { vec![REJECT, ACCEPT] } else { vec![REJECT] })
        .collect();
    ModelSpec::new(
        "ridesharing",
        states,
        ActionSpace::new(vec![0.0, 1.0], feasible),
        p.discount,
        ScalarBounds::scalar(0.0, 1.0)?,
        Arc::new(Ridesharing { types, rewards: p.rewards(), durations: p.durations.clone(), width }),
    )
}
