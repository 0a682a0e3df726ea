//! Tick-by-tick execution of a scenario and its on-disk outputs.

use std::fs;
use std::io;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{Agent, AgentError, TickInput};
use crate::knowledge::{KnowledgeError, KnowledgeStore};
use crate::projection::{JlMap, ProjectionError};
use crate::sim::config::{ConfigError, SimConfig};

pub const METRICS_FILE: &str = "metrics.csv";
pub const CONFIG_FILE: &str = "config.toml";
pub const STORES_DIR: &str = "stores";

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("agent {agent}: {source}")]
    Agent {
        agent: String,
        #[source]
        source: AgentError,
    },
    #[error(transparent)]
    Projection(#[from] ProjectionError),
    #[error(transparent)]
    Knowledge(#[from] KnowledgeError),
    #[error("i/o: {0}")]
    Io(#[from] io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Report(String),
}

impl SimError {
    /// Whether the failure stems from bad input rather than execution.
    pub fn is_validation(&self) -> bool {
        matches!(self, SimError::Config(_))
    }
}

/// One agent's state after a tick; a row of metrics.csv.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub tick: u64,
    pub agent_id: String,
    pub adopted: u64,
    pub store_size: usize,
    pub link_count: usize,
    pub answers_correct: usize,
    pub answers_idk: usize,
    pub teachings: usize,
    pub confidence: f64,
    pub intelligence_score: f64,
    pub last_sleep_merges: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOutput {
    pub rows: Vec<MetricsRow>,
    pub agents: Vec<Agent>,
}

impl SimOutput {
    pub fn metrics_csv(&self) -> Result<Vec<u8>, SimError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.into_inner().map_err(|e| SimError::Io(e.into_error()))
    }

    /// Writes metrics.csv, one store document per agent, and the config
    /// that produced them.
    pub fn write(&self, config: &SimConfig, dir: &Path) -> Result<(), SimError> {
        fs::create_dir_all(dir.join(STORES_DIR))?;
        fs::write(dir.join(METRICS_FILE), self.metrics_csv()?)?;
        for agent in &self.agents {
            fs::write(
                dir.join(STORES_DIR).join(format!("{}.json", agent.name())),
                agent.store().to_json(),
            )?;
        }
        fs::write(dir.join(CONFIG_FILE), config.to_toml())?;
        Ok(())
    }
}

/// Projection shared by all agents, drawn from stream 0 of the run seed.
pub fn shared_projector(config: &SimConfig) -> Result<JlMap, SimError> {
    let d = config.environment.payload_dim;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(0);
    let map = JlMap::for_points(
        d,
        config.environment.batch_size.max(2),
        config.epsilon,
        &mut rng,
    )?;
    Ok(map)
}

/// Per-agent random stream; independent of scheduling order.
fn agent_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64 + 1);
    rng
}

pub fn build_agents(config: &SimConfig) -> Result<Vec<Agent>, SimError> {
    let projector = shared_projector(config)?;
    config
        .agents
        .iter()
        .enumerate()
        .map(|(i, spec)| {
            let store = KnowledgeStore::new(
                projector.clone(),
                spec.store_config(config.environment.kind),
            )?;
            Agent::new(i, spec.id.clone(), spec.bass()?, store, spec.agent_config()).map_err(
                |source| SimError::Agent {
                    agent: spec.id.clone(),
                    source,
                },
            )
        })
        .collect()
}

/// Runs the scenario in memory. Peer teaching reads a snapshot taken at the
/// start of each tick, so the outcome is the same whether agents advance
/// sequentially or in parallel.
pub fn run(config: &SimConfig) -> Result<SimOutput, SimError> {
    config.validate()?;
    let env = config.build_environment()?;
    let mut agents = build_agents(config)?;
    let mut rngs: Vec<ChaCha8Rng> = (0..agents.len())
        .map(|i| agent_rng(config.seed, i))
        .collect();
    let mut last_merges = vec![0usize; agents.len()];
    let mut rows = Vec::with_capacity(agents.len() * config.ticks as usize);

    for tick in 0..config.ticks {
        let input = TickInput {
            now: (tick + 1) as f64 * config.dt,
            dt: config.dt,
            queries: config.evaluation.queries_at(tick),
            force_sleep: tick + 1 == config.ticks,
        };
        let snapshot = if config.peer_teaching {
            agents.clone()
        } else {
            Vec::new()
        };
        let step = |(agent, rng): (&mut Agent, &mut ChaCha8Rng)| {
            agent
                .tick(&env, input, &snapshot, rng)
                .map_err(|source| SimError::Agent {
                    agent: agent.name().to_string(),
                    source,
                })
        };
        let reports: Vec<_> = if config.parallel {
            agents
                .par_iter_mut()
                .zip(rngs.par_iter_mut())
                .map(step)
                .collect()
        } else {
            agents.iter_mut().zip(rngs.iter_mut()).map(step).collect()
        };
        for (i, report) in reports.into_iter().enumerate() {
            let report = report?;
            if let Some(sleep) = &report.sleep {
                last_merges[i] = sleep.merges;
            }
            let agent = &agents[i];
            rows.push(MetricsRow {
                tick: tick + 1,
                agent_id: agent.name().to_string(),
                adopted: agent.adopted_items(),
                store_size: agent.store().len(),
                link_count: agent.store().links().len(),
                answers_correct: report.correct(),
                answers_idk: report.idk(),
                teachings: report.teachings.len(),
                confidence: agent.confidence(),
                intelligence_score: agent.intelligence_score(config.evaluation.window),
                last_sleep_merges: last_merges[i],
            });
        }
    }
    Ok(SimOutput { rows, agents })
}

/// Runs the scenario and writes its outputs under `dir`.
pub fn run_to_dir(config: &SimConfig, dir: &Path) -> Result<SimOutput, SimError> {
    let out = run(config)?;
    out.write(config, dir)?;
    Ok(out)
}

pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRow>, SimError> {
    let mut r = csv::Reader::from_path(path)?;
    let rows = r.deserialize().collect::<Result<Vec<MetricsRow>, _>>()?;
    Ok(rows)
}
