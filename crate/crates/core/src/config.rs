//! One TOML file for every tunable: model weights and constants, alignment
//! thresholds, answering and solver settings, and the cascade threshold
//! list. Absent keys take the built-in defaults, unknown keys are rejected.

use std::fs;
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::ModelConfig;
use crate::reason::ReasonOptions;
use crate::solver::SolverConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("config parse: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("cascade thresholds must be strictly increasing within [0, 1], got {0:?}")]
    BadCascade(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnswerSettings {
    /// Objectives at or below this abstain.
    pub abstain_threshold: f64,
    /// Relative tolerance for counting a runner-up as tied.
    pub tie_tolerance: f64,
}

impl Default for AnswerSettings {
    fn default() -> Self {
        AnswerSettings { abstain_threshold: 0.0, tie_tolerance: 1e-6 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSettings {
    /// Per-solve wall clock budget; absent means unbounded.
    pub time_limit_ms: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CascadeSettings {
    /// Essentiality stages, strictly increasing; empty disables the cascade.
    pub thresholds: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    pub model: ModelConfig,
    pub answer: AnswerSettings,
    pub solver: SolverSettings,
    pub cascade: CascadeSettings,
}

impl EngineConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let t = &self.cascade.thresholds;
        if t.windows(2).any(|w| w[0] >= w[1])
            || t.iter().any(|x| !(0.0..=1.0).contains(x) || !x.is_finite())
        {
            return Err(ConfigError::BadCascade(t.clone()));
        }
        Ok(())
    }

    pub fn solver_config(&self) -> SolverConfig {
        SolverConfig {
            time_limit: self.solver.time_limit_ms.map(Duration::from_millis),
        }
    }

    pub fn reason_options(&self) -> ReasonOptions {
        ReasonOptions {
            model: self.model.clone(),
            abstain_threshold: self.answer.abstain_threshold,
            tie_tolerance: self.answer.tie_tolerance,
            solver: self.solver_config(),
        }
    }
}

pub fn parse_config(text: &str) -> Result<EngineConfig, ConfigError> {
    let cfg: EngineConfig = toml::from_str(text)?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<EngineConfig, ConfigError> {
    let text = fs::read_to_string(path)
        .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
    parse_config(&text)
}

/// The full default configuration as TOML, the starting point for edits.
pub fn default_config_toml() -> String {
    toml::to_string_pretty(&EngineConfig::default()).expect("defaults serialize")
}
