//! Text serialization: CSV tables and the JSON solution record. All floats
//! are written with 12 significant digits, lines end in LF.

use std::io::Write;
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::equilibrium::{Algorithm, MfeSolution, Termination, TraceEntry};
use crate::equilibrium::FixedPointStep;
use crate::learning::{DirectPolicy, EpisodeStats, QTable};
use crate::model::{ModelSpec, PopulationState, StationaryPolicy};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("i/o error on {path}: {source}")]
    File { path: String, source: std::io::Error },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("solution does not match the model: {0}")]
    Mismatch(String),
}

pub const SIG_DIGITS: usize = 12;

/// `v` with 12 significant digits: fixed notation for moderate magnitudes,
/// scientific otherwise; trailing zeros trimmed.
pub fn fmt_sig(v: f64) -> String {
    if v.is_nan() {
        return "NaN".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.*e}", SIG_DIGITS - 1, v);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..=11).contains(&exp) {
        let decimals = (SIG_DIGITS as i32 - 1 - exp).max(0) as usize;
        trim_zeros(format!("{v:.decimals$}"))
    } else {
        format!("{}e{exp}", trim_zeros(mantissa.to_string()))
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// Rounds to 12 significant digits (the value `fmt_sig` prints).
pub fn round_sig(v: f64) -> f64 {
    if v.is_finite() { fmt_sig(v).parse().unwrap_or(v) } else { v }
}

fn join(values: &[f64]) -> String {
    values.iter().map(|v| fmt_sig(*v)).collect::<Vec<_>>().join(";")
}

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>, IoError> {
    let file = std::fs::File::create(path).map_err(|source| IoError::File { path: path.display().to_string(), source })?;
    Ok(csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(file))
}

pub fn write_population_csv(path: &Path, model: &ModelSpec, s: &PopulationState) -> Result<(), IoError> {
    let mut w = writer(path)?;
    w.write_record(["state_label", "probability"])?;
    for (x, p) in s.probs().iter().enumerate() {
        w.write_record([model.states.label(x), &fmt_sig(*p)])?;
    }
    w.flush().map_err(|source| IoError::File { path: path.display().to_string(), source })?;
    Ok(())
}

pub fn write_policy_csv(path: &Path, model: &ModelSpec, g: &StationaryPolicy) -> Result<(), IoError> {
    let mut w = writer(path)?;
    w.write_record(["state_label", "action_value"])?;
    for (x, &a) in g.action_of.iter().enumerate() {
        w.write_record([model.states.label(x), &fmt_sig(model.actions.value(a))])?;
    }
    w.flush().map_err(|source| IoError::File { path: path.display().to_string(), source })?;
    Ok(())
}

pub fn write_trace_csv(path: &Path, trace: &[TraceEntry]) -> Result<(), IoError> {
    let mut w = writer(path)?;
    w.write_record(["iteration", "m", "f", "lo", "hi"])?;
    let opt = |v: Option<f64>| v.map(fmt_sig).unwrap_or_default();
    for t in trace {
        w.write_record([t.iteration.to_string(), join(&t.m), join(&t.f), opt(t.lo), opt(t.hi)])?;
    }
    w.flush().map_err(|source| IoError::File { path: path.display().to_string(), source })?;
    Ok(())
}

pub fn write_fixed_point_csv(path: &Path, steps: &[FixedPointStep]) -> Result<(), IoError> {
    let mut w = writer(path)?;
    w.write_record(["iteration", "m", "change", "population"])?;
    for s in steps {
        w.write_record([s.iteration.to_string(), join(&s.m), fmt_sig(s.change), join(&s.population)])?;
    }
    w.flush().map_err(|source| IoError::File { path: path.display().to_string(), source })?;
    Ok(())
}

pub fn write_qtable_csv(path: &Path, model: &ModelSpec, q: &QTable) -> Result<(), IoError> {
    let mut w = writer(path)?;
    w.write_record(["state_label", "action_value", "q"])?;
    for (x, acts) in q.feasible.iter().enumerate() {
        for &a in acts {
            w.write_record([model.states.label(x), &fmt_sig(model.actions.value(a)), &fmt_sig(q.q[x][a])])?;
        }
    }
    w.flush().map_err(|source| IoError::File { path: path.display().to_string(), source })?;
    Ok(())
}

pub fn write_direct_policy_csv(path: &Path, model: &ModelSpec, sigma: &DirectPolicy) -> Result<(), IoError> {
    let mut w = writer(path)?;
    w.write_record(["state_label", "action_value", "prob"])?;
    for (x, acts) in sigma.feasible.iter().enumerate() {
        for (i, &a) in acts.iter().enumerate() {
            w.write_record([model.states.label(x), &fmt_sig(model.actions.value(a)), &fmt_sig(sigma.probs[x][i])])?;
        }
    }
    w.flush().map_err(|source| IoError::File { path: path.display().to_string(), source })?;
    Ok(())
}

pub fn write_learning_trace_csv(path: &Path, episodes: &[EpisodeStats]) -> Result<(), IoError> {
    let mut w = writer(path)?;
    w.write_record(["episode", "mean_reward", "epsilon"])?;
    for e in episodes {
        w.write_record([e.episode.to_string(), fmt_sig(e.mean_reward), fmt_sig(e.epsilon)])?;
    }
    w.flush().map_err(|source| IoError::File { path: path.display().to_string(), source })?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationEntry {
    pub state_label: String,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iteration: usize,
    pub m: Vec<f64>,
    pub f: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lo: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hi: Option<f64>,
}

/// On-disk form of an [`MfeSolution`]: states and actions by label/value
/// rather than index, plus the resolved configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionRecord {
    pub model: String,
    pub algorithm: Algorithm,
    pub m_star: Vec<f64>,
    pub residual: f64,
    pub consistency_residual: Option<f64>,
    pub converged: bool,
    pub termination: Termination,
    pub clamped: bool,
    pub seeds: Vec<u64>,
    pub wall_seconds: f64,
    pub policy: IndexMap<String, f64>,
    pub population: Vec<PopulationEntry>,
    pub trace: Vec<TraceRecord>,
    pub config: serde_json::Value,
}

impl SolutionRecord {
    pub fn from_solution(model: &ModelSpec, sol: &MfeSolution, config: serde_json::Value) -> Self {
        let r = |v: &[f64]| v.iter().map(|x| round_sig(*x)).collect::<Vec<_>>();
        Self {
            model: sol.model.clone(),
            algorithm: sol.algorithm,
            m_star: r(&sol.m_star),
            residual: round_sig(sol.residual),
            consistency_residual: sol.consistency_residual.map(round_sig),
            converged: sol.converged,
            termination: sol.termination,
            clamped: sol.clamped,
            seeds: sol.seeds.clone(),
            wall_seconds: round_sig(sol.wall_seconds),
            policy: sol
                .policy
                .action_of
                .iter()
                .enumerate()
                .map(|(x, &a)| (model.states.label(x).to_string(), round_sig(model.actions.value(a))))
                .collect(),
            population: sol
                .population
                .probs()
                .iter()
                .enumerate()
                .map(|(x, p)| PopulationEntry { state_label: model.states.label(x).to_string(), probability: round_sig(*p) })
                .collect(),
            trace: sol
                .trace
                .iter()
                .map(|t| TraceRecord { iteration: t.iteration, m: r(&t.m), f: r(&t.f), lo: t.lo.map(round_sig), hi: t.hi.map(round_sig) })
                .collect(),
            config,
        }
    }

    /// Rebuild the in-memory solution against `model`, mapping labels and
    /// action values back to indices.
    pub fn to_solution(&self, model: &ModelSpec) -> Result<MfeSolution, IoError> {
        if self.model != model.name {
            return Err(IoError::Mismatch(format!("solution is for '{}', model is '{}'", self.model, model.name)));
        }
        let n = model.n_states();
        if self.policy.len() != n || self.population.len() != n {
            return Err(IoError::Mismatch(format!(
                "expected {n} states, found {} policy and {} population entries",
                self.policy.len(),
                self.population.len()
            )));
        }
        if self.m_star.len() != model.bounds.dim() {
            return Err(IoError::Mismatch(format!("m_star has {} coordinates", self.m_star.len())));
        }
        let mut action_of = vec![usize::MAX; n];
        for (label, value) in &self.policy {
            let x = model.states.index_of(label).ok_or_else(|| IoError::Mismatch(format!("unknown state '{label}'")))?;
            action_of[x] = model
                .actions
                .index_of_value(*value)
                .ok_or_else(|| IoError::Mismatch(format!("unknown action value {value} in state '{label}'")))?;
        }
        let mut probs = vec![f64::NAN; n];
        for e in &self.population {
            let x = model
                .states
                .index_of(&e.state_label)
                .ok_or_else(|| IoError::Mismatch(format!("unknown state '{}'", e.state_label)))?;
            probs[x] = e.probability;
        }
        if action_of.contains(&usize::MAX) || probs.iter().any(|p| p.is_nan()) {
            return Err(IoError::Mismatch("some states are missing".into()));
        }
        let population = PopulationState::from_weights(probs).map_err(|e| IoError::Mismatch(e.to_string()))?;
        Ok(MfeSolution {
            model: self.model.clone(),
            algorithm: self.algorithm,
            m_star: self.m_star.clone(),
            policy: StationaryPolicy::new(action_of, self.m_star.clone()),
            population,
            residual: self.residual,
            consistency_residual: self.consistency_residual,
            converged: self.converged,
            termination: self.termination,
            trace: self
                .trace
                .iter()
                .map(|t| TraceEntry { iteration: t.iteration, m: t.m.clone(), f: t.f.clone(), lo: t.lo, hi: t.hi })
                .collect(),
            seeds: self.seeds.clone(),
            wall_seconds: self.wall_seconds,
            clamped: self.clamped,
        })
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), IoError> {
    let mut file = std::fs::File::create(path).map_err(|source| IoError::File { path: path.display().to_string(), source })?;
    serde_json::to_writer_pretty(&mut file, value)?;
    file.write_all(b"\n").map_err(|source| IoError::File { path: path.display().to_string(), source })?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, IoError> {
    let text = std::fs::read_to_string(path).map_err(|source| IoError::File { path: path.display().to_string(), source })?;
    Ok(serde_json::from_str(&text)?)
}
