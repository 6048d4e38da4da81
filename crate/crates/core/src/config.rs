//! Run configuration: a TOML document with one section per model plus
//! solver, learning, policy-gradient, Broyden, fixed-point and sweep
//! sections. Missing sections take their defaults; unknown keys are errors.
//!
//! ```toml
//! model = "capacity"
//! algorithm = "vfi"
//! seed = 0
//!
//! [capacity]
//! alpha = 55.0
//!
//! [solver]
//! residual_tol = 1e-3
//! ```

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use toml::{Table, Value};

use crate::equilibrium::{Algorithm, BroydenConfig, SolverConfig};
use crate::learning::{LearningConfig, PolicyGradientConfig};
use crate::models::{
    CapacityParams, InventoryParams, ModelParams, QualityLadderParams, ReputationParams, RidesharingParams,
    SocialLearningParams, MODEL_NAMES,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("cannot parse config: {0}")]
    Parse(String),
    #[error("unknown top-level key '{0}'")]
    UnknownKey(String),
    #[error("[{section}] {message}")]
    Section { section: String, message: String },
    #[error("unknown model '{0}'")]
    UnknownModel(String),
    #[error("missing key '{0}'")]
    Missing(String),
    #[error("bad override '{0}': expected key=value")]
    BadOverride(String),
    #[error("cannot set '{path}': {message}")]
    Path { path: String, message: String },
}

const SECTIONS: [&str; 6] = ["solver", "learning", "policy_gradient", "broyden", "fixed_point", "sweep"];
const SCALARS: [&str; 3] = ["model", "algorithm", "seed"];

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FixedPointConfig {
    /// Starting population; `None` puts all mass on the first state.
    pub initial: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepMode {
    Grid,
    Heatmap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisSpec {
    pub param: String,
    pub values: Vec<Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(default = "default_mode")]
    pub mode: SweepMode,
    #[serde(default)]
    pub algorithm: Option<Algorithm>,
    #[serde(default)]
    pub base_seed: Option<u64>,
    pub axes: Vec<AxisSpec>,
}

fn default_mode() -> SweepMode {
    SweepMode::Grid
}

/// A fully resolved run: every section present, defaults filled in.
#[derive(Debug, Clone)]
pub struct RunConfig {
    /// Resolved document; serializing it reproduces the run.
    pub table: Table,
    pub params: ModelParams,
    pub algorithm: Algorithm,
    pub seed: u64,
    pub solver: SolverConfig,
    pub learning: LearningConfig,
    pub policy_gradient: PolicyGradientConfig,
    pub broyden: BroydenConfig,
    pub fixed_point: FixedPointConfig,
    pub sweep: Option<SweepSpec>,
}

fn to_table<T: Serialize>(v: &T) -> Table {
    Table::try_from(v).expect("config structs serialize to tables")
}

fn model_defaults(name: &str) -> Result<Table, ConfigError> {
    Ok(match name {
        "two-state-toy" => Table::new(),
        "inventory" => to_table(&InventoryParams::default()),
        "capacity" | "capacity-2d" => to_table(&CapacityParams::default()),
        "quality-ladder" => to_table(&QualityLadderParams::default()),
        "ridesharing" => to_table(&RidesharingParams::default()),
        "social-learning" => to_table(&SocialLearningParams::default()),
        "reputation" => to_table(&ReputationParams::default()),
        other => return Err(ConfigError::UnknownModel(other.into())),
    })
}

fn merge(base: &mut Table, over: &Table) {
    for (k, v) in over {
        match (base.get_mut(k), v) {
            (Some(Value::Table(b)), Value::Table(o)) => merge(b, o),
            _ => {
                base.insert(k.clone(), v.clone());
            }
        }
    }
}

fn section<T: DeserializeOwned>(table: &Table, name: &str) -> Result<T, ConfigError> {
    let raw = table.get(name).cloned().unwrap_or_else(|| Value::Table(Table::new()));
    raw.try_into().map_err(|e: toml::de::Error| ConfigError::Section { section: name.into(), message: e.message().to_string() })
}

fn model_params(table: &Table, name: &str) -> Result<ModelParams, ConfigError> {
    Ok(match name {
        "two-state-toy" => {
            if let Some(Value::Table(t)) = table.get(name) {
                if let Some(k) = t.keys().next() {
                    return Err(ConfigError::Section { section: name.into(), message: format!("unknown field `{k}`") });
                }
            }
            ModelParams::TwoStateToy
        }
        "inventory" => ModelParams::Inventory(section(table, name)?),
        "capacity" => ModelParams::Capacity(section(table, name)?),
        "capacity-2d" => ModelParams::Capacity2d(section(table, name)?),
        "quality-ladder" => ModelParams::QualityLadder(section(table, name)?),
        "ridesharing" => ModelParams::Ridesharing(section(table, name)?),
        "social-learning" => ModelParams::SocialLearning(section(table, name)?),
        "reputation" => ModelParams::Reputation(section(table, name)?),
        other => return Err(ConfigError::UnknownModel(other.into())),
    })
}

/// Parses the right-hand side of an override as a TOML value, falling back
/// to a bare string.
pub fn parse_value(raw: &str) -> Value {
    let doc = format!("v = {raw}");
    match doc.parse::<Table>() {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => Value::String(raw.to_string()),
    }
}

/// Sets a dotted path, creating intermediate tables. An integral float
/// written over an integer keeps the integer type.
pub fn set_path(table: &mut Table, path: &str, value: Value) -> Result<(), ConfigError> {
    let parts: Vec<&str> = path.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(ConfigError::Path { path: path.into(), message: "empty path segment".into() });
    }
    let mut cursor = table;
    for part in &parts[..parts.len() - 1] {
        let entry = cursor.entry(part.to_string()).or_insert_with(|| Value::Table(Table::new()));
        cursor = match entry {
            Value::Table(t) => t,
            _ => return Err(ConfigError::Path { path: path.into(), message: format!("'{part}' is not a section") }),
        };
    }
    let leaf = parts[parts.len() - 1];
    let value = match (cursor.get(leaf), value) {
        (Some(Value::Integer(_)), Value::Float(f)) if f.fract() == 0.0 && f.abs() < 9.0e15 => Value::Integer(f as i64),
        (Some(Value::Float(_)), Value::Integer(i)) => Value::Float(i as f64),
        (_, v) => v,
    };
    cursor.insert(leaf.to_string(), value);
    Ok(())
}

/// Expands a bare key to `<model>.<key>`; dotted keys and top-level scalars
/// are kept as written.
pub fn qualify(key: &str, model: &str) -> String {
    if key.contains('.') || SCALARS.contains(&key) { key.to_string() } else { format!("{model}.{key}") }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let table: Table = text.parse().map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        Self::from_table(table)
    }

    pub fn for_model(name: &str) -> Result<Self, ConfigError> {
        let mut t = Table::new();
        t.insert("model".into(), Value::String(name.into()));
        Self::from_table(t)
    }

    /// Resolve a user document: check top-level keys, merge it over the
    /// defaults, then decode every section.
    pub fn from_table(user: Table) -> Result<Self, ConfigError> {
        for key in user.keys() {
            let known = SCALARS.contains(&key.as_str()) || SECTIONS.contains(&key.as_str()) || MODEL_NAMES.contains(&key.as_str());
            if !known {
                return Err(ConfigError::UnknownKey(key.clone()));
            }
        }
        let model = match user.get("model") {
            Some(Value::String(s)) => s.clone(),
            Some(other) => {
                return Err(ConfigError::Section { section: "model".into(), message: format!("expected a string, got {other}") })
            }
            None => return Err(ConfigError::Missing("model".into())),
        };

        let mut full = Table::new();
        full.insert("model".into(), Value::String(model.clone()));
        full.insert("algorithm".into(), Value::String("vfi".into()));
        full.insert("seed".into(), Value::Integer(0));
        full.insert("solver".into(), Value::Table(to_table(&SolverConfig::default())));
        full.insert("learning".into(), Value::Table(to_table(&LearningConfig::default())));
        full.insert("policy_gradient".into(), Value::Table(to_table(&PolicyGradientConfig::default())));
        full.insert("broyden".into(), Value::Table(to_table(&BroydenConfig::default())));
        full.insert("fixed_point".into(), Value::Table(Table::new()));
        full.insert(model.clone(), Value::Table(model_defaults(&model)?));
        merge(&mut full, &user);

        let algorithm = match full.get("algorithm") {
            Some(Value::String(s)) => s.parse().map_err(|e| ConfigError::Section { section: "algorithm".into(), message: e })?,
            _ => return Err(ConfigError::Section { section: "algorithm".into(), message: "expected a string".into() }),
        };
        let seed = match full.get("seed") {
            Some(Value::Integer(i)) if *i >= 0 => *i as u64,
            _ => return Err(ConfigError::Section { section: "seed".into(), message: "expected a non-negative integer".into() }),
        };
        let sweep = match full.get("sweep") {
            Some(_) => Some(section::<SweepSpec>(&full, "sweep")?),
            None => None,
        };
        let solver: SolverConfig = section(&full, "solver")?;
        solver.validate().map_err(|e| ConfigError::Section { section: "solver".into(), message: e.to_string() })?;
        let learning: LearningConfig = section(&full, "learning")?;
        learning.validate().map_err(|e| ConfigError::Section { section: "learning".into(), message: e.to_string() })?;
        Ok(Self {
            params: model_params(&full, &model)?,
            algorithm,
            seed,
            solver,
            learning,
            policy_gradient: section(&full, "policy_gradient")?,
            broyden: section(&full, "broyden")?,
            fixed_point: section(&full, "fixed_point")?,
            sweep,
            table: full,
        })
    }

    pub fn model_name(&self) -> &'static str {
        self.params.name()
    }

    /// Re-resolve after `key=value` overrides (bare keys address the model
    /// section).
    pub fn with_overrides(&self, overrides: &[(String, Value)]) -> Result<Self, ConfigError> {
        let mut table = self.table.clone();
        for (key, value) in overrides {
            set_path(&mut table, &qualify(key, self.model_name()), value.clone())?;
        }
        // A changed model name must not inherit the old model's section.
        if let Some(Value::String(name)) = table.get("model") {
            if name != self.model_name() {
                table.remove(self.model_name());
            }
        }
        Self::from_table(table)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(&self.table).expect("resolved table serializes")
    }
}

/// Splits `key=value`.
pub fn parse_override(raw: &str) -> Result<(String, Value), ConfigError> {
    let (k, v) = raw.split_once('=').ok_or_else(|| ConfigError::BadOverride(raw.into()))?;
    let k = k.trim();
    if k.is_empty() {
        return Err(ConfigError::BadOverride(raw.into()));
    }
    Ok((k.to_string(), parse_value(v.trim())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_resolve_for_every_model() {
        for name in MODEL_NAMES {
            let cfg = RunConfig::for_model(name).unwrap();
            assert_eq!(cfg.model_name(), name);
            cfg.params.build().unwrap();
        }
    }

    #[test]
    fn bare_override_targets_the_model_section() {
        let cfg = RunConfig::for_model("capacity").unwrap();
        let cfg = cfg.with_overrides(&[parse_override("alpha=55").unwrap()]).unwrap();
        match &cfg.params {
            ModelParams::Capacity(p) => assert_eq!(p.alpha, 55.0),
            other => panic!("{other:?}"),
        }
        let cfg = cfg.with_overrides(&[parse_override("solver.residual_tol=1e-5").unwrap()]).unwrap();
        assert_eq!(cfg.solver.residual_tol, 1e-5);
        let cfg = cfg.with_overrides(&[parse_override("max_state=19.0").unwrap()]).unwrap();
        assert_eq!(cfg.params.build().unwrap().n_states(), 20);
    }

    #[test]
    fn unknown_keys_are_named() {
        let err = RunConfig::parse("model = \"capacity\"\n[capacity]\nalpah = 3.0\n").unwrap_err();
        assert!(err.to_string().contains("alpah"), "{err}");
        let err = RunConfig::parse("model = \"capacity\"\nbogus = 1\n").unwrap_err();
        assert_eq!(err, ConfigError::UnknownKey("bogus".into()));
        let err = RunConfig::parse("model = \"nope\"\n").unwrap_err();
        assert_eq!(err, ConfigError::UnknownModel("nope".into()));
    }

    #[test]
    fn resolved_echo_round_trips() {
        let cfg = RunConfig::parse("model = \"inventory\"\nseed = 7\n[inventory]\nholding_cost = 8.0\n").unwrap();
        let again = RunConfig::parse(&cfg.to_toml()).unwrap();
        assert_eq!(again.params, cfg.params);
        assert_eq!(again.seed, 7);
        assert_eq!(again.solver, cfg.solver);
        assert_eq!(again.learning, cfg.learning);
    }

    #[test]
    fn sweep_section_parses() {
        let cfg = RunConfig::parse(
            "model = \"inventory\"\n[sweep]\nmode = \"heatmap\"\n[[sweep.axes]]\nparam = \"holding_cost\"\nvalues = [0, 1]\n[[sweep.axes]]\nparam = \"revenue_share\"\nvalues = [0.3]\n",
        )
        .unwrap();
        let sweep = cfg.sweep.unwrap();
        assert_eq!(sweep.mode, SweepMode::Heatmap);
        assert_eq!(sweep.axes.len(), 2);
    }
}
