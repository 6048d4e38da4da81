//! Game primitives shared by every solver.
//!
//! A [`ModelSpec`] bundles a finite state space, a finite action grid with a
//! feasibility correspondence, a discount factor, the bounds of the
//! interaction value and a [`Dynamics`] implementation that supplies the
//! payoff, the enumerated transition law, a simulator, and the interaction
//! function `M`. Solvers only ever see dense state and action indices.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Sparse probability row: `(next_state, probability)` pairs.
pub type SparseRow = Vec<(usize, f64)>;

/// Tolerance on row sums and population totals.
pub const PROB_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("interaction has dimension {got}, bounds expect {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("state space must not be empty")]
    EmptyStateSpace,
    #[error("state {state} has no feasible action")]
    EmptyFeasibleSet { state: usize },
    #[error("invalid population state: {0}")]
    InvalidPopulation(String),
    #[error("policy picks infeasible action {action} in state {state}")]
    InfeasiblePolicy { state: usize, action: usize },
    #[error("invalid bounds: {0}")]
    InvalidBounds(String),
}

/// Ordered set of opaque state labels with dense indices.
///
/// Product spaces keep their shape so that `encode`/`decode` map between
/// flat indices and coordinate tuples (row-major, last coordinate fastest).
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace {
    labels: Vec<String>,
    values: Vec<f64>,
    shape: Vec<usize>,
}

impl StateSpace {
    pub fn from_labels(labels: Vec<String>) -> Result<Self, ModelError> {
        if labels.is_empty() {
            return Err(ModelError::EmptyStateSpace);
        }
        let values = (0..labels.len()).map(|i| i as f64).collect();
        let shape = vec![labels.len()];
        Ok(Self { labels, values, shape })
    }

    /// States `0..n` labelled by their index.
    pub fn indexed(n: usize) -> Result<Self, ModelError> {
        Self::from_labels((0..n).map(|i| i.to_string()).collect())
    }

    /// Cartesian product of `shape`, labelled by `label(coords)`.
    pub fn product(shape: &[usize], label: impl Fn(&[usize]) -> String) -> Result<Self, ModelError> {
        let n: usize = shape.iter().product();
        if n == 0 {
            return Err(ModelError::EmptyStateSpace);
        }
        let mut space = Self {
            labels: Vec::with_capacity(n),
            values: (0..n).map(|i| i as f64).collect(),
            shape: shape.to_vec(),
        };
        for i in 0..n {
            let coords = space.decode(i);
            space.labels.push(label(&coords));
        }
        Ok(space)
    }

    /// Attach the numeric value of each state used for summary statistics
    /// (mean and variance of the population).
    pub fn with_values(mut self, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), self.labels.len(), "one value per state");
        self.values = values;
        self
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn label(&self, i: usize) -> &str {
        &self.labels[i]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn value(&self, i: usize) -> f64 {
        self.values[i]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn encode(&self, coords: &[usize]) -> usize {
        debug_assert_eq!(coords.len(), self.shape.len());
        coords
            .iter()
            .zip(&self.shape)
            .fold(0, |acc, (&c, &dim)| {
                debug_assert!(c < dim);
                acc * dim + c
            })
    }

    pub fn decode(&self, mut index: usize) -> Vec<usize> {
        let mut coords = vec![0; self.shape.len()];
        for (slot, &dim) in coords.iter_mut().zip(&self.shape).rev() {
            *slot = index % dim;
            index /= dim;
        }
        coords
    }
}

/// Finite action grid plus the feasible-action correspondence.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionSpace {
    values: Vec<f64>,
    feasible: Vec<Vec<usize>>,
}

impl ActionSpace {
    pub fn new(values: Vec<f64>, feasible: Vec<Vec<usize>>) -> Self {
        Self { values, feasible }
    }

    /// Every action feasible in each of `n_states` states.
    pub fn unrestricted(values: Vec<f64>, n_states: usize) -> Self {
        let all: Vec<usize> = (0..values.len()).collect();
        Self { values, feasible: vec![all; n_states] }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn value(&self, a: usize) -> f64 {
        self.values[a]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn feasible(&self, x: usize) -> &[usize] {
        &self.feasible[x]
    }

    pub fn is_feasible(&self, x: usize, a: usize) -> bool {
        self.feasible[x].contains(&a)
    }

    /// Index of the action whose value equals `value` (within 1e-9).
    pub fn index_of_value(&self, value: f64) -> Option<usize> {
        self.values.iter().position(|v| (v - value).abs() <= 1e-9)
    }
}

/// Box `[lo, hi]` (one interval per coordinate) containing the interaction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarBounds {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl ScalarBounds {
    pub fn scalar(lo: f64, hi: f64) -> Result<Self, ModelError> {
        Self::boxed(vec![lo], vec![hi])
    }

    pub fn boxed(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self, ModelError> {
        if lo.is_empty() || lo.len() != hi.len() {
            return Err(ModelError::InvalidBounds(format!(
                "lo has {} coordinates, hi has {}",
                lo.len(),
                hi.len()
            )));
        }
        if let Some(i) = (0..lo.len()).find(|&i| !(lo[i] < hi[i])) {
            return Err(ModelError::InvalidBounds(format!(
                "coordinate {i}: lo {} is not below hi {}",
                lo[i], hi[i]
            )));
        }
        Ok(Self { lo, hi })
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn midpoint(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(l, h)| 0.5 * (l + h)).collect()
    }

    pub fn contains(&self, m: &[f64]) -> bool {
        m.len() == self.dim() && m.iter().enumerate().all(|(i, v)| *v >= self.lo[i] && *v <= self.hi[i])
    }

    /// Clamp in place; returns true when any coordinate moved.
    pub fn clamp(&self, m: &mut [f64]) -> bool {
        let mut moved = false;
        for (i, v) in m.iter_mut().enumerate() {
            let c = v.clamp(self.lo[i], self.hi[i]);
            if c != *v {
                moved = true;
                *v = c;
            }
        }
        moved
    }
}

/// Distribution of agents over states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationState {
    probs: Vec<f64>,
}

impl PopulationState {
    pub fn new(probs: Vec<f64>) -> Result<Self, ModelError> {
        if probs.is_empty() {
            return Err(ModelError::InvalidPopulation("empty vector".into()));
        }
        if let Some((i, p)) = probs.iter().enumerate().find(|(_, p)| !p.is_finite() || **p < 0.0) {
            return Err(ModelError::InvalidPopulation(format!("entry {i} is {p}")));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(ModelError::InvalidPopulation(format!("entries sum to {total}")));
        }
        Ok(Self { probs })
    }

    /// Normalizes a non-negative weight vector.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self, ModelError> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(ModelError::InvalidPopulation(format!("weights sum to {total}")));
        }
        Self::new(weights.into_iter().map(|w| w / total).collect())
    }

    pub fn uniform(n: usize) -> Self {
        Self { probs: vec![1.0 / n as f64; n] }
    }

    pub fn point_mass(n: usize, at: usize) -> Self {
        let mut probs = vec![0.0; n];
        probs[at] = 1.0;
        Self { probs }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn l1_distance(&self, other: &PopulationState) -> f64 {
        self.probs.iter().zip(&other.probs).map(|(a, b)| (a - b).abs()).sum()
    }

    /// Mean of `values` under this distribution.
    pub fn mean_of(&self, values: &[f64]) -> f64 {
        self.probs.iter().zip(values).map(|(p, v)| p * v).sum()
    }

    pub fn variance_of(&self, values: &[f64]) -> f64 {
        let mean = self.mean_of(values);
        self.probs.iter().zip(values).map(|(p, v)| p * (v - mean).powi(2)).sum()
    }
}

/// Deterministic stationary policy computed at a fixed interaction value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationaryPolicy {
    pub action_of: Vec<usize>,
    pub interaction: Vec<f64>,
}

impl StationaryPolicy {
    pub fn new(action_of: Vec<usize>, interaction: Vec<f64>) -> Self {
        Self { action_of, interaction }
    }

    /// Lowest feasible action everywhere.
    pub fn lowest_feasible(actions: &ActionSpace, n_states: usize, m: &[f64]) -> Self {
        let action_of = (0..n_states).map(|x| actions.feasible(x)[0]).collect();
        Self::new(action_of, m.to_vec())
    }

    pub fn action(&self, x: usize) -> usize {
        self.action_of[x]
    }

    pub fn check_feasible(&self, actions: &ActionSpace) -> Result<(), ModelError> {
        for (x, &a) in self.action_of.iter().enumerate() {
            if !actions.is_feasible(x, a) {
                return Err(ModelError::InfeasiblePolicy { state: x, action: a });
            }
        }
        Ok(())
    }
}

/// Exogenous replacement of agents: each period an agent leaves with
/// probability `rate` and is replaced by an entrant in `state`.
///
/// Renewal only enters the population dynamics. The agent's own problem
/// already accounts for exit through its discount factor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Renewal {
    pub rate: f64,
    pub state: usize,
}

/// Model-specific primitives. Implementations must be pure given their
/// inputs and the supplied generator.
pub trait Dynamics: Send + Sync {
    /// Expected single-period payoff `π(x, a, m)`.
    fn payoff(&self, x: usize, a: usize, m: &[f64]) -> f64;

    /// Enumerated law of the next state.
    fn transition_row(&self, x: usize, a: usize, m: &[f64]) -> SparseRow;

    /// Raw (unclamped) interaction value of the population.
    fn interaction(&self, s: &PopulationState, g: &StationaryPolicy, m: &[f64]) -> Vec<f64>;

    /// One draw of the next state. The default inverts the CDF of
    /// `transition_row`; models with an explicit shock override it.
    fn sample_transition(&self, x: usize, a: usize, m: &[f64], rng: &mut dyn RngCore) -> usize {
        sample_sparse(&self.transition_row(x, a, m), rng)
    }

    /// Realized reward and next state from the simulator.
    fn sample_step(&self, x: usize, a: usize, m: &[f64], rng: &mut dyn RngCore) -> (f64, usize) {
        (self.payoff(x, a, m), self.sample_transition(x, a, m, rng))
    }
}

/// Inverse-CDF draw from a sparse row.
pub fn sample_sparse(row: &[(usize, f64)], rng: &mut dyn RngCore) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for &(y, p) in row {
        acc += p;
        if u < acc {
            return y;
        }
    }
    // Rounding left a sliver above the last cumulative value.
    row.iter().rev().find(|(_, p)| *p > 0.0).map(|(y, _)| *y).unwrap_or(row[0].0)
}

/// Interaction value after clamping to the bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionEval {
    pub value: Vec<f64>,
    pub raw: Vec<f64>,
    pub clamped: bool,
}

/// A finite-state, finite-action dynamic game with a low-dimensional
/// interaction. Immutable once built and cheap to clone.
#[derive(Clone)]
pub struct ModelSpec {
    pub name: String,
    pub states: StateSpace,
    pub actions: ActionSpace,
    pub discount: f64,
    pub bounds: ScalarBounds,
    pub renewal: Option<Renewal>,
    dynamics: Arc<dyn Dynamics>,
}

impl fmt::Debug for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ModelSpec")
            .field("name", &self.name)
            .field("states", &self.states.len())
            .field("actions", &self.actions.len())
            .field("discount", &self.discount)
            .field("bounds", &self.bounds)
            .field("renewal", &self.renewal)
            .finish()
    }
}

impl ModelSpec {
    pub fn new(
        name: impl Into<String>,
        states: StateSpace,
        actions: ActionSpace,
        discount: f64,
        bounds: ScalarBounds,
        dynamics: Arc<dyn Dynamics>,
    ) -> Result<Self, ModelError> {
        for x in 0..states.len() {
            if actions.feasible(x).is_empty() {
                return Err(ModelError::EmptyFeasibleSet { state: x });
            }
        }
        Ok(Self { name: name.into(), states, actions, discount, bounds, renewal: None, dynamics })
    }

    pub fn with_renewal(mut self, renewal: Renewal) -> Self {
        self.renewal = Some(renewal);
        self
    }

    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    pub fn feasible(&self, x: usize) -> &[usize] {
        self.actions.feasible(x)
    }

    pub fn payoff(&self, x: usize, a: usize, m: &[f64]) -> f64 {
        self.dynamics.payoff(x, a, m)
    }

    pub fn transition_row(&self, x: usize, a: usize, m: &[f64]) -> SparseRow {
        self.dynamics.transition_row(x, a, m)
    }

    pub fn sample_transition(&self, x: usize, a: usize, m: &[f64], rng: &mut dyn RngCore) -> usize {
        self.dynamics.sample_transition(x, a, m, rng)
    }

    pub fn sample_step(&self, x: usize, a: usize, m: &[f64], rng: &mut dyn RngCore) -> (f64, usize) {
        self.dynamics.sample_step(x, a, m, rng)
    }

    /// Row of the population chain: the agent's transition mixed with
    /// renewal when the model has one.
    pub fn population_row(&self, x: usize, a: usize, m: &[f64]) -> SparseRow {
        let row = self.transition_row(x, a, m);
        match self.renewal {
            None => row,
            Some(r) => {
                let mut mixed: SparseRow = row.into_iter().map(|(y, p)| (y, (1.0 - r.rate) * p)).collect();
                mixed.push((r.state, r.rate));
                mixed
            }
        }
    }

    /// One step of the population chain for a single simulated agent.
    pub fn sample_population_transition(&self, x: usize, a: usize, m: &[f64], rng: &mut dyn RngCore) -> usize {
        if let Some(r) = self.renewal {
            if rng.random::<f64>() < r.rate {
                return r.state;
            }
        }
        self.sample_transition(x, a, m, rng)
    }

    /// `M(s)` clamped to the bounds; clamping is flagged and logged.
    pub fn interaction_value(
        &self,
        s: &PopulationState,
        g: &StationaryPolicy,
        m: &[f64],
    ) -> Result<InteractionEval, ModelError> {
        let raw = self.dynamics.interaction(s, g, m);
        if raw.len() != self.bounds.dim() {
            return Err(ModelError::DimensionMismatch { expected: self.bounds.dim(), got: raw.len() });
        }
        let mut value = raw.clone();
        let clamped = self.bounds.clamp(&mut value);
        if clamped {
            log::debug!("{}: interaction {:?} clamped to {:?}", self.name, raw, value);
        }
        Ok(InteractionEval { value, raw, clamped })
    }

    /// Restricted view for model-free learners.
    pub fn sample_view(&self) -> SampleView<'_> {
        SampleView { model: self }
    }
}

/// What a model-free learner may touch: spaces, feasibility, discount,
/// bounds, the simulator and the interaction function. Payoffs and
/// transition rows are deliberately absent.
#[derive(Clone, Copy)]
pub struct SampleView<'a> {
    model: &'a ModelSpec,
}

impl<'a> SampleView<'a> {
    pub fn name(&self) -> &str {
        &self.model.name
    }

    pub fn states(&self) -> &StateSpace {
        &self.model.states
    }

    pub fn actions(&self) -> &ActionSpace {
        &self.model.actions
    }

    pub fn n_states(&self) -> usize {
        self.model.n_states()
    }

    pub fn feasible(&self, x: usize) -> &[usize] {
        self.model.feasible(x)
    }

    pub fn discount(&self) -> f64 {
        self.model.discount
    }

    pub fn bounds(&self) -> &ScalarBounds {
        &self.model.bounds
    }

    pub fn sample_step(&self, x: usize, a: usize, m: &[f64], rng: &mut dyn RngCore) -> (f64, usize) {
        self.model.sample_step(x, a, m, rng)
    }

    pub fn sample_population_transition(&self, x: usize, a: usize, m: &[f64], rng: &mut dyn RngCore) -> usize {
        self.model.sample_population_transition(x, a, m, rng)
    }

    pub fn interaction_value(
        &self,
        s: &PopulationState,
        g: &StationaryPolicy,
        m: &[f64],
    ) -> Result<InteractionEval, ModelError> {
        self.model.interaction_value(s, g, m)
    }
}

/// A single broken invariant found by [`validate_model`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    EmptyFeasible { state: usize },
    ActionOutOfRange { state: usize, action: usize },
    StateOutOfRange { state: usize, action: usize, m: Vec<f64>, next: usize },
    NegativeProbability { state: usize, action: usize, m: Vec<f64>, next: usize, prob: f64 },
    RowSum { state: usize, action: usize, m: Vec<f64>, sum: f64, deficit: f64 },
    NonFinitePayoff { state: usize, action: usize, m: Vec<f64>, payoff: f64 },
    InteractionOutOfBounds { probe: String, m: Vec<f64>, raw: Vec<f64> },
    InteractionDimension { expected: usize, got: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::EmptyFeasible { state } => write!(f, "state {state}: empty feasible set"),
            Violation::ActionOutOfRange { state, action } => {
                write!(f, "state {state}: feasible action {action} out of range")
            }
            Violation::StateOutOfRange { state, action, m, next } => {
                write!(f, "(x={state}, a={action}, m={m:?}): next state {next} out of range")
            }
            Violation::NegativeProbability { state, action, m, next, prob } => {
                write!(f, "(x={state}, a={action}, m={m:?}): P(->{next}) = {prob} < 0")
            }
            Violation::RowSum { state, action, m, sum, deficit } => {
                write!(f, "(x={state}, a={action}, m={m:?}): row sums to {sum} (deficit {deficit:e})")
            }
            Violation::NonFinitePayoff { state, action, m, payoff } => {
                write!(f, "(x={state}, a={action}, m={m:?}): payoff {payoff}")
            }
            Violation::InteractionOutOfBounds { probe, m, raw } => {
                write!(f, "interaction {raw:?} outside bounds for {probe} at m={m:?}")
            }
            Violation::InteractionDimension { expected, got } => {
                write!(f, "interaction dimension {got}, expected {expected}")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "no violations");
        }
        for v in &self.violations {
            writeln!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Interaction values at which [`validate_model`] scans: lo, mid and hi of
/// every coordinate (jointly).
pub fn probe_points(bounds: &ScalarBounds) -> Vec<Vec<f64>> {
    vec![bounds.lo.clone(), bounds.midpoint(), bounds.hi.clone()]
}

/// Full scan of the model invariants. Violations are data, not errors.
pub fn validate_model(model: &ModelSpec) -> ValidationReport {
    let mut report = ValidationReport::default();
    let n = model.n_states();
    let n_actions = model.actions.len();
    let mut usable = true;
    for x in 0..n {
        let feasible = model.feasible(x);
        if feasible.is_empty() {
            report.violations.push(Violation::EmptyFeasible { state: x });
            usable = false;
        }
        for &a in feasible {
            if a >= n_actions {
                report.violations.push(Violation::ActionOutOfRange { state: x, action: a });
                usable = false;
            }
        }
    }
    if !usable {
        return report;
    }

    for m in probe_points(&model.bounds) {
        for x in 0..n {
            for &a in model.feasible(x) {
                let pay = model.payoff(x, a, &m);
                if !pay.is_finite() {
                    report.violations.push(Violation::NonFinitePayoff { state: x, action: a, m: m.clone(), payoff: pay });
                }
                let row = model.transition_row(x, a, &m);
                let mut sum = 0.0;
                for &(y, p) in &row {
                    if y >= n {
                        report.violations.push(Violation::StateOutOfRange { state: x, action: a, m: m.clone(), next: y });
                    }
                    if p < 0.0 {
                        report.violations.push(Violation::NegativeProbability {
                            state: x,
                            action: a,
                            m: m.clone(),
                            next: y,
                            prob: p,
                        });
                    }
                    sum += p;
                }
                if (sum - 1.0).abs() > PROB_TOL {
                    report.violations.push(Violation::RowSum { state: x, action: a, m: m.clone(), sum, deficit: 1.0 - sum });
                }
            }
        }

        // Interaction probes: point masses and the uniform distribution under
        // the lowest and highest feasible policies.
        let low = StationaryPolicy::lowest_feasible(&model.actions, n, &m);
        let high = StationaryPolicy::new((0..n).map(|x| *model.feasible(x).last().unwrap()).collect(), m.clone());
        let mut probes: Vec<(String, PopulationState)> =
            (0..n).map(|x| (format!("point mass at {}", model.states.label(x)), PopulationState::point_mass(n, x))).collect();
        probes.push(("uniform population".into(), PopulationState::uniform(n)));
        for (name, s) in probes {
            for g in [&low, &high] {
                let raw = model.dynamics.interaction(&s, g, &m);
                if raw.len() != model.bounds.dim() {
                    report.violations.push(Violation::InteractionDimension { expected: model.bounds.dim(), got: raw.len() });
                    return report;
                }
                let slack = 1e-9;
                let out = raw
                    .iter()
                    .enumerate()
                    .any(|(i, v)| !v.is_finite() || *v < model.bounds.lo[i] - slack || *v > model.bounds.hi[i] + slack);
                if out {
                    report.violations.push(Violation::InteractionOutOfBounds { probe: name.clone(), m: m.clone(), raw });
                }
            }
        }
    }
    report
}
