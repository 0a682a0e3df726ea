//! The curious agent: collects information at a Bass-diffusion pace, answers
//! from its knowledge store or says "I don't know", and is taught whenever it
//! does.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::Rng;
use thiserror::Error;

use crate::diffusion::{step_arrivals, BassParams, DiffusionError};
use crate::knowledge::{CompressionReport, KnowledgeError, KnowledgeStore, ReceiveOutcome};
use crate::sim::environment::{Environment, SchemaError};

pub const DEFAULT_THETA_CONF: f64 = 0.2;
pub const DEFAULT_BETA: f64 = 0.1;
pub const DEFAULT_SLEEP_PERIOD: u64 = 50;
pub const DEFAULT_INITIAL_CONFIDENCE: f64 = 0.5;

#[derive(Debug, Error)]
pub enum AgentError {
    #[error(transparent)]
    Knowledge(#[from] KnowledgeError),
    #[error(transparent)]
    Diffusion(#[from] DiffusionError),
    #[error("malformed query: {0}")]
    Schema(#[from] SchemaError),
    #[error("invalid agent configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentConfig {
    /// Answers below this confidence are withheld.
    pub theta_conf: f64,
    /// Smoothing weight of confidence updates.
    pub beta: f64,
    /// Ticks between sleeps.
    pub sleep_period: u64,
    pub initial_confidence: f64,
    /// Optional store cap enforced during sleep.
    pub max_items: Option<usize>,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            theta_conf: DEFAULT_THETA_CONF,
            beta: DEFAULT_BETA,
            sleep_period: DEFAULT_SLEEP_PERIOD,
            initial_confidence: DEFAULT_INITIAL_CONFIDENCE,
            max_items: None,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<(), AgentError> {
        if !(0.0..=1.0).contains(&self.theta_conf) {
            return Err(AgentError::Config(format!(
                "theta_conf must lie in [0, 1], got {}",
                self.theta_conf
            )));
        }
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(AgentError::Config(format!(
                "beta must lie in (0, 1], got {}",
                self.beta
            )));
        }
        if self.sleep_period == 0 {
            return Err(AgentError::Config("sleep_period must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.initial_confidence) {
            return Err(AgentError::Config(
                "initial_confidence must lie in [0, 1]".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Correct,
    Incorrect,
    Taught,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnswerKind {
    Match(u64),
    IDontKnow,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Answer {
    pub kind: AnswerKind,
    /// Nearest stored distance, infinite for an empty store.
    pub distance: f64,
    pub confidence_at_answer: f64,
}

/// One graded evaluation query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnswerRecord {
    pub tick: u64,
    pub topic: usize,
    pub answer: Answer,
    pub correct: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Teacher {
    Environment,
    Peer(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TeachingEvent {
    pub topic: usize,
    pub teacher: Teacher,
    pub outcome: ReceiveOutcome,
}

/// Inputs of one tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TickInput {
    /// Simulation time at the end of this tick.
    pub now: f64,
    pub dt: f64,
    /// Evaluation queries to issue this tick.
    pub queries: usize,
    /// Sleep at the end of this tick regardless of the period.
    pub force_sleep: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TickReport {
    pub time: f64,
    pub arrivals: u64,
    pub hazard_clamped: bool,
    pub received: Vec<ReceiveOutcome>,
    /// Arrivals that failed the schema gate and were quarantined.
    pub rejected: usize,
    pub answers: Vec<AnswerRecord>,
    pub teachings: Vec<TeachingEvent>,
    pub sleep: Option<CompressionReport>,
}

impl TickReport {
    pub fn slept(&self) -> bool {
        self.sleep.is_some()
    }

    pub fn correct(&self) -> usize {
        self.answers.iter().filter(|a| a.correct).count()
    }

    pub fn idk(&self) -> usize {
        self.answers
            .iter()
            .filter(|a| a.answer.kind == AnswerKind::IDontKnow)
            .count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Agent {
    index: usize,
    name: String,
    curiosity: BassParams,
    store: KnowledgeStore,
    confidence: f64,
    config: AgentConfig,
    adopted_items: u64,
    ticks: u64,
    quarantined: u64,
    history: Vec<AnswerRecord>,
    /// Ground-truth topic counts behind each item; used only for grading.
    provenance: BTreeMap<u64, BTreeMap<usize, u64>>,
}

impl Agent {
    pub fn new(
        index: usize,
        name: impl Into<String>,
        curiosity: BassParams,
        store: KnowledgeStore,
        config: AgentConfig,
    ) -> Result<Self, AgentError> {
        config.validate()?;
        Ok(Self {
            index,
            name: name.into(),
            curiosity,
            store,
            confidence: config.initial_confidence,
            config,
            adopted_items: 0,
            ticks: 0,
            quarantined: 0,
            history: Vec::new(),
            provenance: BTreeMap::new(),
        })
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn curiosity(&self) -> &BassParams {
        &self.curiosity
    }

    pub fn store(&self) -> &KnowledgeStore {
        &self.store
    }

    pub fn confidence(&self) -> f64 {
        self.confidence
    }

    pub fn set_confidence(&mut self, c: f64) {
        self.confidence = c.clamp(0.0, 1.0);
    }

    pub fn config(&self) -> &AgentConfig {
        &self.config
    }

    pub fn adopted_items(&self) -> u64 {
        self.adopted_items
    }

    pub fn ticks(&self) -> u64 {
        self.ticks
    }

    pub fn quarantined(&self) -> u64 {
        self.quarantined
    }

    pub fn history(&self) -> &[AnswerRecord] {
        &self.history
    }

    /// Majority ground-truth topic of an item, ties to the smaller topic.
    pub fn item_topic(&self, id: u64) -> Option<usize> {
        self.provenance.get(&id).and_then(|counts| {
            counts
                .iter()
                .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
                .map(|(t, _)| *t)
        })
    }

    fn credit(&mut self, id: u64, topic: usize, count: u64) {
        *self
            .provenance
            .entry(id)
            .or_default()
            .entry(topic)
            .or_default() += count;
    }

    fn check_query(&self, query: &DMatrix<f64>) -> Result<(), AgentError> {
        if query.ncols() != self.store.payload_dim() {
            return Err(SchemaError::Width {
                expected: self.store.payload_dim(),
                got: query.ncols(),
            }
            .into());
        }
        if query.nrows() < 2 {
            return Err(SchemaError::TooFewRows(query.nrows()).into());
        }
        if let Some(pos) = query.iter().position(|v| !v.is_finite()) {
            // column-major storage
            let (row, col) = (pos % query.nrows(), pos / query.nrows());
            return Err(SchemaError::NonFinite { row, col }.into());
        }
        Ok(())
    }

    /// Read-only: answers with the nearest item when it is close enough and
    /// the agent is confident enough, otherwise "I don't know".
    pub fn answer(&self, query: &DMatrix<f64>) -> Result<Answer, AgentError> {
        self.check_query(query)?;
        let nearest = self.store.nearest(query)?;
        let distance = nearest.map_or(f64::INFINITY, |(_, d)| d);
        let kind = match nearest {
            Some((id, d))
                if d <= self.store.config().theta_link
                    && self.confidence >= self.config.theta_conf =>
            {
                AnswerKind::Match(id)
            }
            _ => AnswerKind::IDontKnow,
        };
        Ok(Answer {
            kind,
            distance,
            confidence_at_answer: self.confidence,
        })
    }

    /// Absorbs a lesson and counts it as a positive outcome. `topic` is the
    /// ground-truth label used for grading, when known.
    pub fn teach(
        &mut self,
        query: &DMatrix<f64>,
        topic: Option<usize>,
        now: f64,
    ) -> Result<ReceiveOutcome, AgentError> {
        self.check_query(query)?;
        let outcome = self.store.receive(query, now)?;
        if let Some(t) = topic {
            self.credit(outcome.id(), t, 1);
        }
        self.update_confidence(Outcome::Taught);
        Ok(outcome)
    }

    /// `c <- (1 - beta) c + beta r`, with `r = 1` for correct or taught.
    pub fn update_confidence(&mut self, outcome: Outcome) -> f64 {
        let r = match outcome {
            Outcome::Correct | Outcome::Taught => 1.0,
            Outcome::Incorrect => 0.0,
        };
        let beta = self.config.beta;
        self.confidence = ((1.0 - beta) * self.confidence + beta * r).clamp(0.0, 1.0);
        self.confidence
    }

    /// Mean, over graded queries in the last `window` ticks, of the current
    /// run of consecutive correct answers on each query's topic.
    pub fn intelligence_score(&self, window: u64) -> f64 {
        let window = window.max(1);
        let start = self.ticks.saturating_sub(window);
        let recent: Vec<&AnswerRecord> = self.history.iter().filter(|r| r.tick >= start).collect();
        if recent.is_empty() {
            return 0.0;
        }
        let mut streaks: BTreeMap<usize, u64> = BTreeMap::new();
        for topic in recent.iter().map(|r| r.topic) {
            streaks.entry(topic).or_insert_with(|| {
                recent
                    .iter()
                    .rev()
                    .filter(|r| r.topic == topic)
                    .take_while(|r| r.correct)
                    .count() as u64
            });
        }
        let total: u64 = recent.iter().map(|r| streaks[&r.topic]).sum();
        total as f64 / recent.len() as f64
    }

    /// Grades one query, teaching on "I don't know".
    fn evaluate_one<R: Rng + ?Sized>(
        &mut self,
        env: &Environment,
        peers: &[Agent],
        now: f64,
        rng: &mut R,
        report: &mut TickReport,
    ) -> Result<(), AgentError> {
        let topic = env.pick_topic(rng);
        let query = env.query(topic, rng);
        let answer = self.answer(&query)?;
        if answer.kind == AnswerKind::IDontKnow {
            let event = match self.learn_from_peers(&query, peers, now)? {
                Some(e) => e,
                None => TeachingEvent {
                    topic,
                    teacher: Teacher::Environment,
                    outcome: self.teach(&query, Some(topic), now)?,
                },
            };
            report.teachings.push(TeachingEvent { topic, ..event });
        }
        report.answers.push(self.grade(topic, answer));
        Ok(())
    }

    /// Grades an answer to a query from `topic` and records it in the
    /// history. A match is correct when its item mostly holds that topic;
    /// matches move confidence, "I don't know" does not.
    pub fn grade(&mut self, topic: usize, answer: Answer) -> AnswerRecord {
        let correct = match answer.kind {
            AnswerKind::Match(id) => {
                let ok = self.item_topic(id) == Some(topic);
                self.update_confidence(if ok {
                    Outcome::Correct
                } else {
                    Outcome::Incorrect
                });
                ok
            }
            AnswerKind::IDontKnow => false,
        };
        let record = AnswerRecord {
            tick: self.ticks,
            topic,
            answer,
            correct,
        };
        self.history.push(record);
        record
    }

    /// Advances the agent's tick counter; [`Agent::tick`] does this itself.
    pub fn close_tick(&mut self) -> u64 {
        self.ticks += 1;
        self.ticks
    }

    /// Copies the matching summary from the first peer able to answer.
    fn learn_from_peers(
        &mut self,
        query: &DMatrix<f64>,
        peers: &[Agent],
        now: f64,
    ) -> Result<Option<TeachingEvent>, AgentError> {
        for peer in peers.iter().filter(|p| p.index != self.index) {
            if peer.store.projector() != self.store.projector() {
                continue;
            }
            let AnswerKind::Match(pid) = peer.answer(query)?.kind else {
                continue;
            };
            let item = peer.store.item(pid).expect("answered id is live");
            let outcome = self.store.receive_stats(item.stats.clone(), now)?;
            if let Some(counts) = peer.provenance.get(&pid) {
                for (&t, &c) in counts {
                    self.credit(outcome.id(), t, c);
                }
            }
            self.update_confidence(Outcome::Taught);
            return Ok(Some(TeachingEvent {
                topic: usize::MAX,
                teacher: Teacher::Peer(peer.index),
                outcome,
            }));
        }
        Ok(None)
    }

    fn apply_sleep(&mut self) -> Result<CompressionReport, AgentError> {
        let report = self.store.sleep(self.config.max_items)?;
        for &(kept, absorbed) in &report.merged {
            if let Some(counts) = self.provenance.remove(&absorbed) {
                for (t, c) in counts {
                    self.credit(kept, t, c);
                }
            }
        }
        for id in &report.pruned_ids {
            self.provenance.remove(id);
        }
        Ok(report)
    }

    /// Runs a sleep phase outside the tick cadence.
    pub fn sleep(&mut self) -> Result<CompressionReport, AgentError> {
        self.apply_sleep()
    }

    /// One pass of the learning loop: Bass-paced collection through the
    /// schema gate, graded evaluation queries with teaching on "I don't
    /// know", and a sleep phase every `sleep_period` ticks. `peers` is a
    /// snapshot of other agents that may teach instead of the environment.
    pub fn tick<R: Rng + ?Sized>(
        &mut self,
        env: &Environment,
        input: TickInput,
        peers: &[Agent],
        rng: &mut R,
    ) -> Result<TickReport, AgentError> {
        let draw = step_arrivals(&self.curiosity, self.adopted_items, input.dt, rng)?;
        self.adopted_items += draw.arrivals;
        let mut report = TickReport {
            time: input.now,
            arrivals: draw.arrivals,
            hazard_clamped: draw.clamped,
            received: Vec::new(),
            rejected: 0,
            answers: Vec::new(),
            teachings: Vec::new(),
            sleep: None,
        };

        for _ in 0..draw.arrivals {
            let (topic, batch) = env.arrival(rng);
            if env.validate_batch(&batch).is_err() {
                self.quarantined += 1;
                report.rejected += 1;
                continue;
            }
            let outcome = self.store.receive(&batch, input.now)?;
            self.credit(outcome.id(), topic, 1);
            report.received.push(outcome);
        }

        for _ in 0..input.queries {
            self.evaluate_one(env, peers, input.now, rng, &mut report)?;
        }

        self.close_tick();
        if input.force_sleep || self.ticks.is_multiple_of(self.config.sleep_period) {
            report.sleep = Some(self.apply_sleep()?);
        }
        Ok(report)
    }
}
