use std::sync::Arc;

use crate::model::{ActionSpace, Dynamics, ModelSpec, PopulationState, ScalarBounds, SparseRow, StateSpace, StationaryPolicy};

/// Two states, one action, zero payoff; from either state the agent moves
/// to state 1 with probability m. `M(s)` is the mass on state 2, so
/// `f(m) = 2m − 1` and the naive fixed-point iteration cycles.
struct TwoStateToy;

impl Dynamics for TwoStateToy {
    fn payoff(&self, _x: usize, _a: usize, _m: &[f64]) -> f64 {
        0.0
    }

    fn transition_row(&self, _x: usize, _a: usize, m: &[f64]) -> SparseRow {
        vec![(0, m[0]), (1, 1.0 - m[0])]
    }

    fn interaction(&self, s: &PopulationState, _g: &StationaryPolicy, _m: &[f64]) -> Vec<f64> {
        vec![s.probs()[1]]
    }
}

pub fn build_two_state_toy() -> ModelSpec {
    ModelSpec::new(
        "two-state-toy",
        StateSpace::from_labels(vec!["1".into(), "2".into()]).expect("two labels").with_values(vec![1.0, 2.0]),
        ActionSpace::unrestricted(vec![0.0], 2),
        0.9,
        ScalarBounds::scalar(0.0, 1.0).expect("valid bounds"),
        Arc::new(TwoStateToy),
    )
    .expect("toy model is well formed")
}
