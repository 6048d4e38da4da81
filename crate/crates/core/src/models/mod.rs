//! Builders for the application models.
//!
//! Each builder turns a parameter record (one config section, defaults equal
//! to the published simulation values) into a [`ModelSpec`].

pub mod capacity;
pub mod inventory;
pub mod reputation;
pub mod ridesharing;
pub mod social_learning;
pub mod toy;

use crate::model::{ModelError, ModelSpec};

pub use capacity::{build_capacity_2d_model, build_capacity_model, build_quality_ladder_model, CapacityParams, QualityLadderParams};
pub use inventory::{build_inventory_model, inventory_demand, platform_revenue, InventoryParams};
pub use reputation::{build_reputation_model, ReputationParams};
pub use ridesharing::{build_ridesharing_model, RidesharingParams};
pub use social_learning::{build_social_learning_model, SocialLearningParams};
pub use toy::build_two_state_toy;

pub const MODEL_NAMES: [&str; 8] = [
    "two-state-toy",
    "inventory",
    "capacity",
    "quality-ladder",
    "ridesharing",
    "social-learning",
    "reputation",
    "capacity-2d",
];

/// Parameter record of any built-in model.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelParams {
    TwoStateToy,
    Inventory(InventoryParams),
    Capacity(CapacityParams),
    QualityLadder(QualityLadderParams),
    Ridesharing(RidesharingParams),
    SocialLearning(SocialLearningParams),
    Reputation(ReputationParams),
    Capacity2d(CapacityParams),
}

impl ModelParams {
    pub fn defaults(name: &str) -> Option<Self> {
        Some(match name {
            "two-state-toy" => ModelParams::TwoStateToy,
            "inventory" => ModelParams::Inventory(InventoryParams::default()),
            "capacity" => ModelParams::Capacity(CapacityParams::default()),
            "quality-ladder" => ModelParams::QualityLadder(QualityLadderParams::default()),
            "ridesharing" => ModelParams::Ridesharing(RidesharingParams::default()),
            "social-learning" => ModelParams::SocialLearning(SocialLearningParams::default()),
            "reputation" => ModelParams::Reputation(ReputationParams::default()),
            "capacity-2d" => ModelParams::Capacity2d(CapacityParams::default()),
            _ => return None,
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            ModelParams::TwoStateToy => "two-state-toy",
            ModelParams::Inventory(_) => "inventory",
            ModelParams::Capacity(_) => "capacity",
            ModelParams::QualityLadder(_) => "quality-ladder",
            ModelParams::Ridesharing(_) => "ridesharing",
            ModelParams::SocialLearning(_) => "social-learning",
            ModelParams::Reputation(_) => "reputation",
            ModelParams::Capacity2d(_) => "capacity-2d",
        }
    }

    pub fn build(&self) -> Result<ModelSpec, ModelError> {
        match self {
            ModelParams::TwoStateToy => Ok(build_two_state_toy()),
            ModelParams::Inventory(p) => build_inventory_model(p),
            ModelParams::Capacity(p) => build_capacity_model(p),
            ModelParams::QualityLadder(p) => build_quality_ladder_model(p),
            ModelParams::Ridesharing(p) => build_ridesharing_model(p),
            ModelParams::SocialLearning(p) => build_social_learning_model(p),
            ModelParams::Reputation(p) => build_reputation_model(p),
            ModelParams::Capacity2d(p) => build_capacity_2d_model(p),
        }
    }
}

/// Nearest integer, halves rounded up. The small guard keeps values that
/// are mathematically on a tie but land a hair below it in floating point
/// on the same side as exact ties.
pub fn round_half_up(v: f64) -> i64 {
    (v + 0.5 + 1e-9).floor() as i64
}

/// Index of the nearest point of the grid `{0, step, …, (n−1)·step}`,
/// clamped to the grid.
pub fn snap_to_grid(v: f64, step: f64, n: usize) -> usize {
    round_half_up(v / step).clamp(0, n as i64 - 1) as usize
}

pub(crate) fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), ModelError> {
    if cond { Ok(()) } else { Err(ModelError::InvalidBounds(msg())) }
}
