//! Stationary mean field equilibria for dynamic games in which agents
//! interact only through a scalar (or low-dimensional) statistic of the
//! population.
//!
//! Model-based solvers live in [`equilibrium`], model-free ones in
//! [`learning`]. The six application models plus a two-state toy are built
//! by [`models`]; [`experiments`] runs comparative-statics sweeps over them.

pub mod chain;
pub mod config;
pub mod dp;
pub mod equilibrium;
pub mod experiments;
pub mod io;
pub mod learning;
pub mod model;
pub mod models;
pub mod runner;
pub mod seed;

pub use chain::{ChainError, Ergodicity, TransitionMatrix};
pub use dp::ValueTable;
pub use equilibrium::{MfeSolution, SolverConfig, SolverError, Termination};
pub use model::{
    ActionSpace, Dynamics, ModelError, ModelSpec, PopulationState, ScalarBounds, StateSpace, StationaryPolicy,
};
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
