//! Run summaries computed from a metrics table.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::diffusion::installed_fraction;
use crate::sim::config::SimConfig;
use crate::sim::runner::{MetricsRow, SimError, CONFIG_FILE};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentSummary {
    pub agent_id: String,
    pub ticks: u64,
    pub final_adopted: u64,
    pub final_store_size: usize,
    pub final_confidence: f64,
    pub final_intelligence_score: f64,
    /// Correct answers over queries issued in the last evaluation window.
    /// Needs the run config; `None` without it.
    pub final_accuracy: Option<f64>,
    /// RMSE of `adopted / m` against the closed-form installed fraction.
    /// Needs the run config; `None` without it.
    pub adoption_rmse: Option<f64>,
    pub intelligence_trajectory: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub rows: usize,
    pub agents: Vec<AgentSummary>,
}

/// Aggregates a metrics table per agent, in order of first appearance.
pub fn summarize(rows: &[MetricsRow], config: Option<&SimConfig>) -> Result<Summary, SimError> {
    if rows.is_empty() {
        return Err(SimError::Report("metrics table is empty".into()));
    }
    let mut order: Vec<&str> = Vec::new();
    for r in rows {
        if !order.contains(&r.agent_id.as_str()) {
            order.push(&r.agent_id);
        }
    }
    let agents = order
        .into_iter()
        .map(|id| {
            let mine: Vec<&MetricsRow> = rows.iter().filter(|r| r.agent_id == id).collect();
            let last = mine[mine.len() - 1];
            let spec = config.and_then(|c| c.agents.iter().find(|a| a.id == id));

            let final_accuracy = config.and_then(|c| {
                let start = last.tick.saturating_sub(c.evaluation.window);
                let (correct, asked) =
                    mine.iter()
                        .filter(|r| r.tick > start)
                        .fold((0usize, 0usize), |(ok, n), r| {
                            (
                                ok + r.answers_correct,
                                n + c.evaluation.queries_at(r.tick - 1),
                            )
                        });
                (asked > 0).then(|| correct as f64 / asked as f64)
            });

            let adoption_rmse = match (config, spec) {
                (Some(c), Some(a)) => {
                    let params = a.bass().map_err(SimError::Config)?;
                    let mut sse = 0.0;
                    for r in &mine {
                        let f = installed_fraction(&params, r.tick as f64 * c.dt)
                            .map_err(|e| SimError::Report(e.to_string()))?;
                        let e = r.adopted as f64 / a.m - f;
                        sse += e * e;
                    }
                    Some((sse / mine.len() as f64).sqrt())
                }
                _ => None,
            };

            Ok(AgentSummary {
                agent_id: id.to_string(),
                ticks: last.tick,
                final_adopted: last.adopted,
                final_store_size: last.store_size,
                final_confidence: last.confidence,
                final_intelligence_score: last.intelligence_score,
                final_accuracy,
                adoption_rmse,
                intelligence_trajectory: mine.iter().map(|r| r.intelligence_score).collect(),
            })
        })
        .collect::<Result<Vec<_>, SimError>>()?;
    Ok(Summary {
        rows: rows.len(),
        agents,
    })
}

/// Reads `metrics`, picks up the config.toml written beside it when present,
/// and writes the summary JSON to `out`, creating parent directories.
pub fn report(metrics: &Path, out: &Path) -> Result<Summary, SimError> {
    let rows = crate::sim::runner::read_metrics(metrics)?;
    let config_path = metrics.parent().unwrap_or(Path::new(".")).join(CONFIG_FILE);
    let config = if config_path.exists() {
        Some(SimConfig::from_toml(&fs::read_to_string(config_path)?)?)
    } else {
        None
    };
    let summary = summarize(&rows, config.as_ref())?;
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    let text = serde_json::to_string_pretty(&summary).expect("summary serializes");
    fs::write(out, text + "\n")?;
    Ok(summary)
}
