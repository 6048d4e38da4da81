//! Model-free solvers.
//!
//! Everything here works through [`SampleView`](crate::model::SampleView):
//! the simulator, feasibility and the interaction function, never the
//! enumerated payoffs or transition rows. The exact policy gradient is the
//! one deliberate exception and says so in its signature.

mod adaptive;
mod policy_gradient;
mod qlearning;
mod replay;
mod simplex;

pub use adaptive::{adaptive_policy_gradient, adaptive_q_learning, AdaptivePgOutcome, AdaptiveQOutcome};
pub use policy_gradient::{
    policy_evaluation, projected_policy_gradient, DirectPolicy, GradientMode, PolicyGradientConfig, PolicyGradientResult,
};
pub use qlearning::{greedy_policy, q_learning, EpisodeStats, QTable};
pub use replay::{ReplayBuffer, Transition};
pub use simplex::simplex_projection;

use serde::{Deserialize, Serialize};

use crate::equilibrium::SolverError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum LearningRate {
    Constant { rate: f64 },
    /// `scale / (1 + visits(x, a))^exponent`.
    RobbinsMonro { scale: f64, exponent: f64 },
}

impl LearningRate {
    pub fn at(&self, visits: u64) -> f64 {
        match *self {
            LearningRate::Constant { rate } => rate,
            LearningRate::RobbinsMonro { scale, exponent } => scale / (1.0 + visits as f64).powf(exponent),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearningConfig {
    /// Environment steps per Q-learning run (H).
    pub horizon: usize,
    pub learning_rate: LearningRate,
    pub epsilon_start: f64,
    pub epsilon_min: f64,
    pub episode_length: usize,
    pub replay_capacity: usize,
    pub batch_size: usize,
    /// Simulated transitions per Monte Carlo population estimate (K).
    pub mc_samples: usize,
    pub mc_burn_in: usize,
    pub mc_start_state: usize,
    pub seed: u64,
}

impl Default for LearningConfig {
    fn default() -> Self {
        Self {
            horizon: 100_000,
            learning_rate: LearningRate::Constant { rate: 0.003 },
            epsilon_start: 0.9,
            epsilon_min: 0.05,
            episode_length: 100,
            replay_capacity: 500,
            batch_size: 16,
            mc_samples: 200_000,
            mc_burn_in: 0,
            mc_start_state: 0,
            seed: 0,
        }
    }
}

impl LearningConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        let bad = |msg: &str| Err(SolverError::Config(msg.into()));
        if self.horizon == 0 || self.episode_length == 0 || self.replay_capacity == 0 || self.batch_size == 0 {
            return bad("horizon, episode_length, replay_capacity and batch_size must be at least 1");
        }
        if self.mc_samples == 0 {
            return bad("mc_samples must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.epsilon_start) || !(0.0..=1.0).contains(&self.epsilon_min) {
            return bad("exploration rates must lie in [0,1]");
        }
        match self.learning_rate {
            LearningRate::Constant { rate } if !(rate > 0.0 && rate < 1.0) => bad("constant learning rate must lie in (0,1)"),
            LearningRate::RobbinsMonro { scale, exponent } if !(scale > 0.0 && exponent > 0.5 && exponent <= 1.0) => {
                bad("Robbins-Monro rates need scale > 0 and exponent in (0.5, 1]")
            }
            _ => Ok(()),
        }
    }

    pub fn episodes(&self) -> usize {
        self.horizon.div_ceil(self.episode_length)
    }

    /// Exploration rate in `episode`: exponential decay from
    /// `epsilon_start` reaching `epsilon_min` at the last planned episode.
    pub fn epsilon(&self, episode: usize) -> f64 {
        let episodes = self.episodes();
        if episodes <= 1 || self.epsilon_start <= self.epsilon_min {
            return self.epsilon_start.max(self.epsilon_min);
        }
        let ratio = if self.epsilon_min > 0.0 {
            (self.epsilon_min / self.epsilon_start).powf(1.0 / (episodes - 1) as f64)
        } else {
            0.0
        };
        (self.epsilon_start * ratio.powi(episode as i32)).max(self.epsilon_min)
    }
}
