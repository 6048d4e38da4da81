//! Inventory competition with stockout spillover.
//!
//! A retailer holding x units orders up to a ∈ {x, …, x̄}. Demand is
//! `D = ⌊ζ + γm⌉` where m is the unmet demand spilling over from rivals;
//! leftover stock `(a − D)₊` carries to the next period.

use std::sync::Arc;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::{check, round_half_up};
use crate::equilibrium::MfeSolution;
use crate::model::{
    ActionSpace, Dynamics, ModelError, ModelSpec, PopulationState, ScalarBounds, SparseRow, StateSpace, StationaryPolicy,
};

/// Slack on the interaction upper bound `E[ζ]`.
const UPPER_MARGIN: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InventoryParams {
    pub max_inventory: usize,
    pub price: f64,
    pub shortage_cost: f64,
    pub holding_cost: f64,
    pub revenue_share: f64,
    pub spillover: f64,
    /// Coefficient of the quadratic ordering cost `(a − x)²`.
    pub order_cost: f64,
    pub discount: f64,
    /// ζ ranges over `{0, step, …, (points−1)·step}` with weight
    /// proportional to `1/(z + offset)` on the z-th point.
    pub demand_step: f64,
    pub demand_points: usize,
    pub demand_offset: f64,
}

impl Default for InventoryParams {
    fn default() -> Self {
        Self {
            max_inventory: 9,
            price: 30.0,
            shortage_cost: 2.0,
            holding_cost: 2.0,
            revenue_share: 1.0,
            spillover: 1.0,
            order_cost: 1.0,
            discount: 0.95,
            demand_step: 0.5,
            demand_points: 19,
            demand_offset: 5.0,
        }
    }
}

impl InventoryParams {
    fn validate(&self) -> Result<(), ModelError> {
        check(self.price >= 0.0 && self.shortage_cost >= 0.0 && self.holding_cost >= 0.0, || {
            "price and costs must be non-negative".into()
        })?;
        check((0.0..=1.0).contains(&self.revenue_share), || "revenue_share must lie in [0,1]".into())?;
        check(self.spillover >= 0.0 && self.order_cost >= 0.0, || "spillover and order_cost must be non-negative".into())?;
        check(self.demand_points >= 1 && self.demand_step > 0.0 && self.demand_offset > 0.0, || {
            "demand support needs at least one point, a positive step and a positive offset".into()
        })?;
        check(self.discount > 0.0 && self.discount < 1.0, || "discount must lie in (0,1)".into())
    }

    /// `(ζ, q(ζ))` pairs of the demand shock.
    pub fn shock_support(&self) -> Vec<(f64, f64)> {
        let raw: Vec<f64> = (0..self.demand_points).map(|z| 1.0 / (z as f64 + self.demand_offset)).collect();
        let total: f64 = raw.iter().sum();
        raw.iter().enumerate().map(|(z, w)| (z as f64 * self.demand_step, w / total)).collect()
    }

    pub fn mean_shock(&self) -> f64 {
        self.shock_support().iter().map(|(z, w)| z * w).sum()
    }

    /// Realized demand levels and their probabilities at interaction m.
    pub fn demand_law(&self, m: f64) -> Vec<(i64, f64)> {
        self.shock_support().into_iter().map(|(z, w)| (inventory_demand(z, m, self.spillover), w)).collect()
    }
}

pub fn inventory_demand(zeta: f64, m: f64, spillover: f64) -> i64 {
    round_half_up(zeta + spillover * m)
}

struct Inventory {
    p: InventoryParams,
    shocks: Vec<(f64, f64)>,
}

impl Inventory {
    fn reward(&self, x: usize, a: usize, d: i64) -> f64 {
        let (a_f, d_f) = (a as f64, d as f64);
        let p = &self.p;
        p.revenue_share * p.price * a_f.min(d_f)
            - p.order_cost * ((a - x) as f64).powi(2)
            - p.holding_cost * (a_f - d_f).max(0.0)
            - p.shortage_cost * (d_f - a_f).max(0.0)
    }
}

impl Dynamics for Inventory {
    fn payoff(&self, x: usize, a: usize, m: &[f64]) -> f64 {
        self.shocks.iter().map(|&(z, w)| w * self.reward(x, a, inventory_demand(z, m[0], self.p.spillover))).sum()
    }

    fn transition_row(&self, _x: usize, a: usize, m: &[f64]) -> SparseRow {
        let mut mass = vec![0.0; self.p.max_inventory + 1];
        for &(z, w) in &self.shocks {
            let d = inventory_demand(z, m[0], self.p.spillover);
            mass[(a as i64 - d).max(0) as usize] += w;
        }
        mass.into_iter().enumerate().filter(|(_, w)| *w > 0.0).collect()
    }

    fn sample_step(&self, x: usize, a: usize, m: &[f64], rng: &mut dyn RngCore) -> (f64, usize) {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut zeta = self.shocks.last().expect("non-empty support").0;
        for &(z, w) in &self.shocks {
            acc += w;
            if u < acc {
                zeta = z;
                break;
            }
        }
        let d = inventory_demand(zeta, m[0], self.p.spillover);
        (self.reward(x, a, d), (a as i64 - d).max(0) as usize)
    }

    fn sample_transition(&self, x: usize, a: usize, m: &[f64], rng: &mut dyn RngCore) -> usize {
        self.sample_step(x, a, m, rng).1
    }

    /// Expected unmet demand `Σ_x s(x) E(ζ − g(x))₊`.
    fn interaction(&self, s: &PopulationState, g: &StationaryPolicy, _m: &[f64]) -> Vec<f64> {
        let unmet: f64 = s
            .probs()
            .iter()
            .enumerate()
            .map(|(x, sx)| {
                let a = g.action(x) as f64;
                sx * self.shocks.iter().map(|(z, w)| w * (z - a).max(0.0)).sum::<f64>()
            })
            .sum();
        vec![unmet]
    }
}

pub fn build_inventory_model(p: &InventoryParams) -> Result<ModelSpec, ModelError> {
    p.validate()?;
    let n = p.max_inventory + 1;
    let feasible = (0..n).map(|x| (x..n).collect()).collect();
    let actions = ActionSpace::new((0..n).map(|a| a as f64).collect(), feasible);
    let hi = p.mean_shock() * (1.0 + UPPER_MARGIN);
    ModelSpec::new(
        "inventory",
        StateSpace::indexed(n)?,
        actions,
        p.discount,
        ScalarBounds::scalar(0.0, hi)?,
        Arc::new(Inventory { p: p.clone(), shocks: p.shock_support() }),
    )
}

/// Commission plus holding-fee revenue of the platform:
/// `(1−τ) r Σ s(x) E min(g(x), D) + h Σ s(x) E (g(x) − D)₊`.
pub fn platform_revenue(solution: &MfeSolution, p: &InventoryParams) -> f64 {
    let orders: Vec<f64> = solution.policy.action_of.iter().map(|&a| a as f64).collect();
    let demand: Vec<(f64, f64)> = p.demand_law(solution.m_star[0]).into_iter().map(|(d, w)| (d as f64, w)).collect();
    revenue_under(solution.population.probs(), &orders, &demand, p.revenue_share, p.price, p.holding_cost)
}

/// [`platform_revenue`] for an explicit population, order levels and
/// demand law.
pub fn revenue_under(s: &[f64], orders: &[f64], demand: &[(f64, f64)], share: f64, price: f64, holding: f64) -> f64 {
    s.iter()
        .zip(orders)
        .map(|(sx, &a)| {
            let sold: f64 = demand.iter().map(|(d, w)| w * a.min(*d)).sum();
            let left: f64 = demand.iter().map(|(d, w)| w * (a - d).max(0.0)).sum();
            sx * ((1.0 - share) * price * sold + holding * left)
        })
        .sum()
}
