//! Scenario harness: environment, configuration, execution and reporting.

pub mod config;
pub mod environment;
pub mod report;
pub mod runner;

pub use config::{
    AgentSpec, ConfigError, EnvironmentConfig, EvaluationConfig, SimConfig, TopicSpec,
};
pub use environment::{Environment, PayloadKind, SchemaError, Topic};
pub use report::{report, summarize, AgentSummary, Summary};
pub use runner::{run, run_to_dir, MetricsRow, SimError, SimOutput};
