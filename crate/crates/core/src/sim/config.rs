//! Scenario configuration, read from and written to TOML.

use std::path::PathBuf;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{AgentConfig, DEFAULT_BETA, DEFAULT_SLEEP_PERIOD, DEFAULT_THETA_CONF};
use crate::diffusion::BassParams;
use crate::knowledge::{
    Metric, StoreConfig, DEFAULT_ALPHA, DEFAULT_THETA_LINK, DEFAULT_THETA_MERGE,
};
use crate::sim::environment::{Environment, PayloadKind, Topic};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError::Invalid(msg.into()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub seed: u64,
    pub ticks: u64,
    pub dt: f64,
    /// Projection distortion shared by every agent in the run.
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Lets an agent that says "I don't know" learn from a peer's matching
    /// item before falling back to the environment.
    #[serde(default)]
    pub peer_teaching: bool,
    #[serde(default = "default_true")]
    pub parallel: bool,
    #[serde(default)]
    pub evaluation: EvaluationConfig,
    pub environment: EnvironmentConfig,
    pub agents: Vec<AgentSpec>,
}

fn default_epsilon() -> f64 {
    0.5
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("results")
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluationConfig {
    /// Issue queries on ticks divisible by this.
    pub every: u64,
    /// Queries per evaluation tick.
    pub queries: usize,
    /// Ticks covered by the intelligence score and final accuracy.
    pub window: u64,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        Self {
            every: 1,
            queries: 1,
            window: 50,
        }
    }
}

impl EvaluationConfig {
    pub fn queries_at(&self, tick: u64) -> usize {
        if tick.is_multiple_of(self.every) {
            self.queries
        } else {
            0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentConfig {
    #[serde(default)]
    pub kind: PayloadKind,
    pub payload_dim: usize,
    pub batch_size: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    #[serde(default)]
    pub corrupt_rate: f64,
    pub topics: Vec<TopicSpec>,
}

/// One topic: `mean` with either `std` (isotropic) or a full `cov` for
/// Gaussian payloads, or `probs` for categorical payloads.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopicSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub std: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cov: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probs: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentSpec {
    pub id: String,
    pub p: f64,
    pub q: f64,
    pub m: f64,
    #[serde(default = "d_theta_link")]
    pub theta_link: f64,
    #[serde(default = "d_theta_merge")]
    pub theta_merge: f64,
    #[serde(default = "d_theta_conf")]
    pub theta_conf: f64,
    #[serde(default = "d_alpha")]
    pub alpha: f64,
    #[serde(default = "d_beta")]
    pub beta: f64,
    #[serde(default = "d_sleep_period")]
    pub sleep_period: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_items: Option<usize>,
}

fn d_theta_link() -> f64 {
    DEFAULT_THETA_LINK
}
fn d_theta_merge() -> f64 {
    DEFAULT_THETA_MERGE
}
fn d_theta_conf() -> f64 {
    DEFAULT_THETA_CONF
}
fn d_alpha() -> f64 {
    DEFAULT_ALPHA
}
fn d_beta() -> f64 {
    DEFAULT_BETA
}
fn d_sleep_period() -> u64 {
    DEFAULT_SLEEP_PERIOD
}

impl AgentSpec {
    pub fn bass(&self) -> Result<BassParams, ConfigError> {
        let params = BassParams::new(self.p, self.q, self.m)
            .map_err(|e| ConfigError::Invalid(format!("agent {}: {e}", self.id)))?;
        if self.m.fract() != 0.0 {
            return invalid(format!("agent {}: m must be a whole number", self.id));
        }
        Ok(params)
    }

    pub fn store_config(&self, kind: PayloadKind) -> StoreConfig {
        StoreConfig {
            alpha: self.alpha,
            theta_link: self.theta_link,
            theta_merge: self.theta_merge,
            metric: match kind {
                PayloadKind::Gaussian => Metric::Gaussian,
                PayloadKind::Categorical => Metric::Categorical,
            },
        }
    }

    pub fn agent_config(&self) -> AgentConfig {
        AgentConfig {
            theta_conf: self.theta_conf,
            beta: self.beta,
            sleep_period: self.sleep_period,
            max_items: self.max_items,
            ..AgentConfig::default()
        }
    }
}

impl SimConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Checks every field; the run refuses to start otherwise.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.ticks == 0 {
            return invalid("ticks must be >= 1");
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return invalid(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return invalid(format!("epsilon must lie in (0, 1), got {}", self.epsilon));
        }
        if self.evaluation.every == 0 || self.evaluation.window == 0 {
            return invalid("evaluation.every and evaluation.window must be >= 1");
        }
        if self.agents.is_empty() {
            return invalid("at least one agent is required");
        }
        let mut seen = std::collections::BTreeSet::new();
        for a in &self.agents {
            if a.id.is_empty()
                || !a
                    .id
                    .chars()
                    .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
            {
                return invalid(format!(
                    "agent id {:?} must be non-empty and use only letters, digits, '_' or '-'",
                    a.id
                ));
            }
            if !seen.insert(a.id.as_str()) {
                return invalid(format!("duplicate agent id {:?}", a.id));
            }
            a.bass()?;
            for (name, v) in [
                ("theta_link", a.theta_link),
                ("theta_merge", a.theta_merge),
                ("theta_conf", a.theta_conf),
                ("alpha", a.alpha),
                ("beta", a.beta),
            ] {
                if !(v.is_finite() && v > 0.0) {
                    return invalid(format!("agent {}: {name} must be positive, got {v}", a.id));
                }
            }
            a.store_config(self.environment.kind)
                .validate()
                .map_err(|e| ConfigError::Invalid(format!("agent {}: {e}", a.id)))?;
            a.agent_config()
                .validate()
                .map_err(|e| ConfigError::Invalid(format!("agent {}: {e}", a.id)))?;
        }
        self.build_environment()?;
        Ok(())
    }

    pub fn build_environment(&self) -> Result<Environment, ConfigError> {
        let env = &self.environment;
        let d = env.payload_dim;
        if d == 0 {
            return invalid("environment.payload_dim must be >= 1");
        }
        let mut topics = Vec::with_capacity(env.topics.len());
        for (i, t) in env.topics.iter().enumerate() {
            let topic = match env.kind {
                PayloadKind::Gaussian => {
                    if t.probs.is_some() {
                        return invalid(format!("topic {i}: probs needs kind = \"categorical\""));
                    }
                    let mean = t
                        .mean
                        .clone()
                        .ok_or_else(|| ConfigError::Invalid(format!("topic {i}: missing mean")))?;
                    if mean.len() != d {
                        return invalid(format!("topic {i}: mean must have {d} entries"));
                    }
                    match (t.std, &t.cov) {
                        (Some(s), None) if s.is_finite() && s > 0.0 => Topic::isotropic(i, mean, s),
                        (None, Some(rows)) => {
                            if rows.len() != d || rows.iter().any(|r| r.len() != d) {
                                return invalid(format!("topic {i}: cov must be {d} x {d}"));
                            }
                            let flat: Vec<f64> = rows.iter().flatten().copied().collect();
                            Topic::gaussian(i, mean, DMatrix::from_row_slice(d, d, &flat))
                        }
                        _ => {
                            return invalid(format!(
                                "topic {i}: give exactly one of a positive std or a cov"
                            ))
                        }
                    }
                }
                PayloadKind::Categorical => {
                    if t.mean.is_some() || t.std.is_some() || t.cov.is_some() {
                        return invalid(format!("topic {i}: categorical topics take only probs"));
                    }
                    let probs = t
                        .probs
                        .clone()
                        .ok_or_else(|| ConfigError::Invalid(format!("topic {i}: missing probs")))?;
                    if probs.len() != d {
                        return invalid(format!("topic {i}: probs must have {d} entries"));
                    }
                    Topic::categorical(i, probs)
                }
            }
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
            topics.push(topic);
        }
        Environment::new(topics, env.batch_size, env.weights.clone())
            .and_then(|e| e.with_corrupt_rate(env.corrupt_rate))
            .map_err(|e| ConfigError::Invalid(e.to_string()))
    }
}
