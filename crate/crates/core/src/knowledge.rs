//! The knowledge store: projected distributional summaries of everything an
//! agent has absorbed, with similarity links between them.
//!
//! Each item keeps only Gaussian sufficient statistics in the store's reduced
//! dimension; raw batches are dropped once absorbed. Repeated receipt of
//! matching information strengthens retention as `1 - (1 - alpha)^count`.
//! [`KnowledgeStore::sleep`] merges near-duplicates and optionally prunes
//! weakly retained items.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::distance::{bc_discrete, bc_mvn, DistanceError};
use crate::distributions::{smoothed_frequencies, DistributionError, SufficientStats};
use crate::projection::{JlMap, ProjectionError};

pub const DOCUMENT_VERSION: u32 = 1;
pub const DEFAULT_ALPHA: f64 = 0.3;
pub const DEFAULT_THETA_LINK: f64 = 0.5;
pub const DEFAULT_THETA_MERGE: f64 = 0.25;

#[derive(Debug, Error)]
pub enum KnowledgeError {
    #[error("batch dimension {got} does not match store payload dimension {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("need at least 2 rows per batch, got {0}")]
    TooFewRows(usize),
    #[error("invalid store configuration: {0}")]
    Config(String),
    #[error("no item with id {0}")]
    UnknownItem(u64),
    #[error(transparent)]
    Distribution(#[from] DistributionError),
    #[error(transparent)]
    Distance(#[from] DistanceError),
    #[error(transparent)]
    Projection(#[from] ProjectionError),
    #[error("store document: {0}")]
    Parse(String),
}

/// How item summaries are compared.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    /// Multivariate normal summaries, compared with the closed-form distance.
    #[default]
    Gaussian,
    /// One-hot rows; category counts compared as smoothed frequencies.
    Categorical,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StoreConfig {
    pub alpha: f64,
    pub theta_link: f64,
    pub theta_merge: f64,
    #[serde(default)]
    pub metric: Metric,
}

impl Default for StoreConfig {
    fn default() -> Self {
        Self {
            alpha: DEFAULT_ALPHA,
            theta_link: DEFAULT_THETA_LINK,
            theta_merge: DEFAULT_THETA_MERGE,
            metric: Metric::Gaussian,
        }
    }
}

impl StoreConfig {
    pub fn validate(&self) -> Result<(), KnowledgeError> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(KnowledgeError::Config(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        for (name, v) in [
            ("theta_link", self.theta_link),
            ("theta_merge", self.theta_merge),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(KnowledgeError::Config(format!(
                    "{name} must be > 0, got {v}"
                )));
            }
        }
        Ok(())
    }

    pub fn retention(&self, receipt_count: u64) -> f64 {
        1.0 - (1.0 - self.alpha).powf(receipt_count as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KnowledgeItem {
    pub id: u64,
    pub stats: SufficientStats,
    pub receipt_count: u64,
    pub retention: f64,
    pub last_seen: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Link {
    pub a: u64,
    pub b: u64,
    pub distance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ReceiveOutcome {
    Matched { id: u64, distance: f64 },
    Novel { id: u64 },
}

impl ReceiveOutcome {
    pub fn id(&self) -> u64 {
        match *self {
            Self::Matched { id, .. } | Self::Novel { id } => id,
        }
    }

    pub fn is_novel(&self) -> bool {
        matches!(self, Self::Novel { .. })
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CompressionReport {
    pub merges: usize,
    pub pruned: usize,
    pub size_before: usize,
    pub size_after: usize,
    /// Receipts lost with pruned items.
    pub pruned_receipts: u64,
    /// `(kept, absorbed)` id pairs in merge order.
    pub merged: Vec<(u64, u64)>,
    pub pruned_ids: Vec<u64>,
}

/// A batch reduced to the store's comparison space.
#[derive(Debug, Clone)]
enum Summary {
    Gaussian(crate::distributions::MvnSummary),
    Categorical(crate::distributions::CategoricalDist),
}

#[derive(Debug, Clone, PartialEq)]
pub struct KnowledgeStore {
    items: Vec<KnowledgeItem>,
    links: Vec<Link>,
    projector: JlMap,
    config: StoreConfig,
    next_id: u64,
}

impl KnowledgeStore {
    pub fn new(projector: JlMap, config: StoreConfig) -> Result<Self, KnowledgeError> {
        config.validate()?;
        if config.metric == Metric::Categorical && !projector.is_identity() {
            return Err(KnowledgeError::Config(
                "categorical stores compare raw counts and need an identity projector".into(),
            ));
        }
        Ok(Self {
            items: Vec::new(),
            links: Vec::new(),
            projector,
            config,
            next_id: 0,
        })
    }

    pub fn k(&self) -> usize {
        self.projector.target_dim()
    }

    pub fn payload_dim(&self) -> usize {
        self.projector.source_dim()
    }

    pub fn projector(&self) -> &JlMap {
        &self.projector
    }

    pub fn config(&self) -> &StoreConfig {
        &self.config
    }

    pub fn items(&self) -> &[KnowledgeItem] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn item(&self, id: u64) -> Option<&KnowledgeItem> {
        self.items.iter().find(|i| i.id == id)
    }

    pub fn total_receipts(&self) -> u64 {
        self.items.iter().map(|i| i.receipt_count).sum()
    }

    /// Projects a raw `n x d` batch into the store's reduced space.
    pub fn project(&self, batch: &DMatrix<f64>) -> Result<SufficientStats, KnowledgeError> {
        if batch.ncols() != self.payload_dim() {
            return Err(KnowledgeError::DimensionMismatch {
                expected: self.payload_dim(),
                got: batch.ncols(),
            });
        }
        if batch.nrows() < 2 {
            return Err(KnowledgeError::TooFewRows(batch.nrows()));
        }
        Ok(SufficientStats::from_batch(
            &self.projector.apply_rows(batch)?,
        ))
    }

    fn summarize(&self, stats: &SufficientStats) -> Result<Summary, KnowledgeError> {
        Ok(match self.config.metric {
            Metric::Gaussian => Summary::Gaussian(stats.to_mvn()?),
            Metric::Categorical => {
                Summary::Categorical(smoothed_frequencies(stats.sum().as_slice())?)
            }
        })
    }

    fn summary_distance(a: &Summary, b: &Summary) -> Result<f64, KnowledgeError> {
        Ok(match (a, b) {
            (Summary::Gaussian(x), Summary::Gaussian(y)) => bc_mvn(x, y)?.distance(),
            (Summary::Categorical(x), Summary::Categorical(y)) => bc_discrete(x, y)?.distance(),
            _ => unreachable!("one metric per store"),
        })
    }

    /// Distance between two reduced-space statistics under the store's metric.
    pub fn stats_distance(
        &self,
        a: &SufficientStats,
        b: &SufficientStats,
    ) -> Result<f64, KnowledgeError> {
        Self::summary_distance(&self.summarize(a)?, &self.summarize(b)?)
    }

    /// Closest item to `stats` (ties to the smaller id), without mutating.
    pub fn nearest_stats(
        &self,
        stats: &SufficientStats,
    ) -> Result<Option<(u64, f64)>, KnowledgeError> {
        if stats.dim() != self.k() {
            return Err(KnowledgeError::DimensionMismatch {
                expected: self.k(),
                got: stats.dim(),
            });
        }
        let query = self.summarize(stats)?;
        let mut best: Option<(u64, f64)> = None;
        for item in &self.items {
            let d = Self::summary_distance(&query, &self.summarize(&item.stats)?)?;
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((item.id, d));
            }
        }
        Ok(best)
    }

    /// Closest item to a raw batch.
    pub fn nearest(&self, batch: &DMatrix<f64>) -> Result<Option<(u64, f64)>, KnowledgeError> {
        self.nearest_stats(&self.project(batch)?)
    }

    /// Projects and absorbs a raw batch: merged into the nearest item when
    /// within `theta_link`, otherwise stored as a new item.
    pub fn receive(
        &mut self,
        batch: &DMatrix<f64>,
        now: f64,
    ) -> Result<ReceiveOutcome, KnowledgeError> {
        let stats = self.project(batch)?;
        self.receive_stats(stats, now)
    }

    /// Absorbs statistics that already live in the reduced space.
    pub fn receive_stats(
        &mut self,
        stats: SufficientStats,
        now: f64,
    ) -> Result<ReceiveOutcome, KnowledgeError> {
        if stats.n() < 2 {
            return Err(KnowledgeError::TooFewRows(stats.n() as usize));
        }
        let outcome = match self.nearest_stats(&stats)? {
            Some((id, distance)) if distance <= self.config.theta_link => {
                let retention_of = |c| self.config.retention(c);
                let idx = self.index_of(id)?;
                let item = &mut self.items[idx];
                item.stats = item.stats.merge(&stats)?;
                item.receipt_count += 1;
                item.retention = retention_of(item.receipt_count);
                item.last_seen = now;
                ReceiveOutcome::Matched { id, distance }
            }
            _ => {
                let id = self.next_id;
                self.next_id += 1;
                self.items.push(KnowledgeItem {
                    id,
                    stats,
                    receipt_count: 1,
                    retention: self.config.retention(1),
                    last_seen: now,
                });
                ReceiveOutcome::Novel { id }
            }
        };
        self.relink(outcome.id())?;
        Ok(outcome)
    }

    fn index_of(&self, id: u64) -> Result<usize, KnowledgeError> {
        self.items
            .iter()
            .position(|i| i.id == id)
            .ok_or(KnowledgeError::UnknownItem(id))
    }

    /// Recomputes the links touching one item.
    fn relink(&mut self, id: u64) -> Result<(), KnowledgeError> {
        self.links.retain(|l| l.a != id && l.b != id);
        let target = self.summarize(&self.items[self.index_of(id)?].stats)?;
        for item in &self.items {
            if item.id == id {
                continue;
            }
            let d = Self::summary_distance(&target, &self.summarize(&item.stats)?)?;
            if d <= self.config.theta_link {
                self.links.push(Link {
                    a: id.min(item.id),
                    b: id.max(item.id),
                    distance: d,
                });
            }
        }
        self.links.sort_by_key(|l| (l.a, l.b));
        Ok(())
    }

    fn pairwise(&self) -> Result<Vec<Link>, KnowledgeError> {
        let summaries = self
            .items
            .iter()
            .map(|i| self.summarize(&i.stats))
            .collect::<Result<Vec<_>, _>>()?;
        let mut out = Vec::new();
        for i in 0..self.items.len() {
            for j in (i + 1)..self.items.len() {
                let (a, b) = (self.items[i].id, self.items[j].id);
                out.push(Link {
                    a: a.min(b),
                    b: a.max(b),
                    distance: Self::summary_distance(&summaries[i], &summaries[j])?,
                });
            }
        }
        Ok(out)
    }

    /// Rebuilds every link from scratch; returns the link count.
    pub fn refresh_links(&mut self) -> Result<usize, KnowledgeError> {
        let mut links: Vec<Link> = self
            .pairwise()?
            .into_iter()
            .filter(|l| l.distance <= self.config.theta_link)
            .collect();
        links.sort_by_key(|l| (l.a, l.b));
        self.links = links;
        Ok(self.links.len())
    }

    /// Offline compression: greedily merges the closest pair while it is
    /// closer than `theta_merge`, then prunes down to `max_items`.
    pub fn sleep(&mut self, max_items: Option<usize>) -> Result<CompressionReport, KnowledgeError> {
        let mut report = CompressionReport {
            size_before: self.items.len(),
            ..Default::default()
        };
        loop {
            let closest = self.pairwise()?.into_iter().min_by(|x, y| {
                x.distance
                    .total_cmp(&y.distance)
                    .then((x.a, x.b).cmp(&(y.a, y.b)))
            });
            let Some(pair) = closest else { break };
            if pair.distance >= self.config.theta_merge {
                break;
            }
            let absorbed = self.items.remove(self.index_of(pair.b)?);
            let kept = self.index_of(pair.a)?;
            let item = &mut self.items[kept];
            item.stats = item.stats.merge(&absorbed.stats)?;
            item.receipt_count += absorbed.receipt_count;
            item.retention = self.config.retention(item.receipt_count);
            item.last_seen = item.last_seen.max(absorbed.last_seen);
            report.merges += 1;
            report.merged.push((pair.a, pair.b));
        }

        if let Some(cap) = max_items {
            if self.items.len() > cap {
                let mut order: Vec<&KnowledgeItem> = self.items.iter().collect();
                order.sort_by(|x, y| {
                    x.retention
                        .total_cmp(&y.retention)
                        .then(x.last_seen.total_cmp(&y.last_seen))
                        .then(x.id.cmp(&y.id))
                });
                let doomed: Vec<u64> = order
                    .iter()
                    .take(self.items.len() - cap)
                    .map(|i| i.id)
                    .collect();
                for id in &doomed {
                    let removed = self.items.remove(self.index_of(*id)?);
                    report.pruned_receipts += removed.receipt_count;
                }
                report.pruned = doomed.len();
                report.pruned_ids = doomed;
            }
        }

        self.refresh_links()?;
        report.size_after = self.items.len();
        Ok(report)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&StoreDocument::from(self)).expect("finite store serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, KnowledgeError> {
        let doc: StoreDocument =
            serde_json::from_str(text).map_err(|e| KnowledgeError::Parse(e.to_string()))?;
        doc.into_store()
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ProjectorDocument {
    d: usize,
    k: usize,
    epsilon: f64,
    /// Row-major `k x d`; absent for the identity map.
    matrix: Option<Vec<f64>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ItemDocument {
    id: u64,
    n: u64,
    sum: Vec<f64>,
    sum_outer: Vec<f64>,
    receipt_count: u64,
    retention: f64,
    last_seen: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct StoreDocument {
    version: u32,
    k: usize,
    alpha: f64,
    theta_link: f64,
    theta_merge: f64,
    #[serde(default)]
    metric: Metric,
    next_id: u64,
    projector: ProjectorDocument,
    items: Vec<ItemDocument>,
    links: Vec<(u64, u64, f64)>,
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    m.transpose().as_slice().to_vec()
}

impl From<&KnowledgeStore> for StoreDocument {
    fn from(store: &KnowledgeStore) -> Self {
        let p = &store.projector;
        Self {
            version: DOCUMENT_VERSION,
            k: store.k(),
            alpha: store.config.alpha,
            theta_link: store.config.theta_link,
            theta_merge: store.config.theta_merge,
            metric: store.config.metric,
            next_id: store.next_id,
            projector: ProjectorDocument {
                d: p.source_dim(),
                k: p.target_dim(),
                epsilon: p.epsilon(),
                matrix: p.matrix().map(row_major),
            },
            items: store
                .items
                .iter()
                .map(|i| ItemDocument {
                    id: i.id,
                    n: i.stats.n(),
                    sum: i.stats.sum().as_slice().to_vec(),
                    sum_outer: row_major(i.stats.sum_outer()),
                    receipt_count: i.receipt_count,
                    retention: i.retention,
                    last_seen: i.last_seen,
                })
                .collect(),
            links: store.links.iter().map(|l| (l.a, l.b, l.distance)).collect(),
        }
    }
}

fn parse_err(msg: impl Into<String>) -> KnowledgeError {
    KnowledgeError::Parse(msg.into())
}

impl StoreDocument {
    fn into_store(self) -> Result<KnowledgeStore, KnowledgeError> {
        if self.version != DOCUMENT_VERSION {
            return Err(parse_err(format!(
                "`version`: unsupported version {}",
                self.version
            )));
        }
        let pd = self.projector;
        let projector = match pd.matrix {
            None => {
                if pd.k != pd.d {
                    return Err(parse_err("`projector.k`: identity map needs k == d"));
                }
                JlMap::identity(pd.d, pd.epsilon)
            }
            Some(entries) => {
                if entries.len() != pd.k * pd.d {
                    return Err(parse_err(format!(
                        "`projector.matrix`: expected {} entries, got {}",
                        pd.k * pd.d,
                        entries.len()
                    )));
                }
                JlMap::from_matrix(DMatrix::from_row_slice(pd.k, pd.d, &entries), pd.epsilon)
            }
        }
        .map_err(|e| parse_err(format!("`projector`: {e}")))?;
        if self.k != projector.target_dim() {
            return Err(parse_err(format!(
                "`k`: {} disagrees with projector target dimension {}",
                self.k,
                projector.target_dim()
            )));
        }
        let config = StoreConfig {
            alpha: self.alpha,
            theta_link: self.theta_link,
            theta_merge: self.theta_merge,
            metric: self.metric,
        };
        let mut store = KnowledgeStore::new(projector, config)?;
        let k = self.k;
        for doc in self.items {
            if doc.sum.len() != k || doc.sum_outer.len() != k * k {
                return Err(parse_err(format!(
                    "`items` id {}: `sum`/`sum_outer` sizes do not match k = {k}",
                    doc.id
                )));
            }
            if doc.receipt_count == 0 {
                return Err(parse_err(format!(
                    "`items` id {}: `receipt_count` is 0",
                    doc.id
                )));
            }
            if doc.id >= self.next_id || store.item(doc.id).is_some() {
                return Err(parse_err(format!(
                    "`items` id {}: duplicate or beyond `next_id`",
                    doc.id
                )));
            }
            let stats = SufficientStats::from_parts(
                doc.n,
                DVector::from_vec(doc.sum),
                DMatrix::from_row_slice(k, k, &doc.sum_outer),
            )
            .map_err(|e| parse_err(format!("`items` id {}: {e}", doc.id)))?;
            store.items.push(KnowledgeItem {
                id: doc.id,
                stats,
                receipt_count: doc.receipt_count,
                retention: doc.retention,
                last_seen: doc.last_seen,
            });
        }
        for (a, b, distance) in self.links {
            if store.item(a).is_none() || store.item(b).is_none() {
                return Err(parse_err(format!(
                    "`links`: ({a}, {b}) references a missing item"
                )));
            }
            store.links.push(Link { a, b, distance });
        }
        store.next_id = self.next_id;
        Ok(store)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn batch(rng: &mut ChaCha8Rng, n: usize, mean: &[f64]) -> DMatrix<f64> {
        DMatrix::from_fn(n, mean.len(), |_, j| {
            let z: f64 = StandardNormal.sample(rng);
            mean[j] + z
        })
    }

    fn store(d: usize, config: StoreConfig) -> KnowledgeStore {
        KnowledgeStore::new(JlMap::identity(d, 0.5).unwrap(), config).unwrap()
    }

    #[test]
    fn first_receive_is_novel() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut s = store(3, StoreConfig::default());
        let out = s.receive(&batch(&mut rng, 64, &[0.0; 3]), 0.0).unwrap();
        assert_eq!(out, ReceiveOutcome::Novel { id: 0 });
        assert_eq!(s.item(0).unwrap().receipt_count, 1);
        assert!((s.item(0).unwrap().retention - 0.3).abs() < 1e-15);
    }

    #[test]
    fn same_batch_twice_matches() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let b = batch(&mut rng, 64, &[1.0, 2.0]);
        let mut s = store(2, StoreConfig::default());
        s.receive(&b, 0.0).unwrap();
        match s.receive(&b, 1.0).unwrap() {
            ReceiveOutcome::Matched { id, distance } => {
                assert_eq!(id, 0);
                assert!(distance < 1e-6);
            }
            other => panic!("expected match, got {other:?}"),
        }
        let item = s.item(0).unwrap();
        assert_eq!(item.receipt_count, 2);
        assert_eq!(item.last_seen, 1.0);
        assert!((item.retention - (1.0 - 0.7f64.powi(2))).abs() < 1e-15);
    }

    #[test]
    fn separated_sources_stay_apart() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut s = store(4, StoreConfig::default());
        let a = batch(&mut rng, 64, &[0.0; 4]);
        let b = batch(&mut rng, 64, &[6.0; 4]);
        s.receive(&a, 0.0).unwrap();
        assert!(s.receive(&b, 1.0).unwrap().is_novel());
        assert_eq!(s.len(), 2);
        assert_eq!(s.links().len(), 0);
    }

    #[test]
    fn wrong_shape_rejected() {
        let mut s = store(3, StoreConfig::default());
        assert!(matches!(
            s.receive(&DMatrix::zeros(5, 2), 0.0),
            Err(KnowledgeError::DimensionMismatch {
                expected: 3,
                got: 2
            })
        ));
        assert!(matches!(
            s.receive(&DMatrix::zeros(1, 3), 0.0),
            Err(KnowledgeError::TooFewRows(1))
        ));
    }

    #[test]
    fn links_for_tiny_stores() {
        let mut s = store(2, StoreConfig::default());
        assert_eq!(s.refresh_links().unwrap(), 0);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        s.receive(&batch(&mut rng, 64, &[0.0, 0.0]), 0.0).unwrap();
        assert_eq!(s.refresh_links().unwrap(), 0);
    }

    #[test]
    fn link_set_ignores_insertion_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let batches: Vec<_> = (0..4)
            .map(|i| batch(&mut rng, 64, &[(i / 2) as f64 * 8.0, 0.0]))
            .collect();
        let cfg = StoreConfig {
            theta_link: 0.5,
            theta_merge: 0.25,
            alpha: 0.3,
            metric: Metric::Gaussian,
        };
        // force every batch into its own item
        let link_distances = |order: &[usize]| {
            let mut s = store(
                2,
                StoreConfig {
                    theta_link: 1e-9,
                    ..cfg
                },
            );
            for &i in order {
                s.receive(&batches[i], 0.0).unwrap();
            }
            s.config.theta_link = cfg.theta_link;
            s.refresh_links().unwrap();
            let mut d: Vec<u64> = s.links().iter().map(|l| l.distance.to_bits()).collect();
            d.sort();
            d
        };
        assert_eq!(link_distances(&[0, 1, 2, 3]), link_distances(&[3, 1, 0, 2]));
        assert_eq!(link_distances(&[0, 1, 2, 3]).len(), 2);
    }

    #[test]
    fn sleep_fixpoint_when_nothing_close() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut s = store(2, StoreConfig::default());
        s.receive(&batch(&mut rng, 64, &[0.0, 0.0]), 0.0).unwrap();
        s.receive(&batch(&mut rng, 64, &[9.0, 9.0]), 1.0).unwrap();
        let before = s.clone();
        let r = s.sleep(None).unwrap();
        assert_eq!(
            (r.merges, r.pruned, r.size_before, r.size_after),
            (0, 0, 2, 2)
        );
        assert_eq!(s, before);
    }

    #[test]
    fn sleep_merges_identical_items() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let b = batch(&mut rng, 64, &[0.0, 1.0]);
        let mut s = store(2, StoreConfig::default());
        s.receive(&b, 0.0).unwrap();
        // a twin item can only arise from outside receive, e.g. a loaded document
        let mut twin = s.items()[0].clone();
        twin.id = 1;
        twin.last_seen = 1.0;
        s.items.push(twin);
        s.next_id = 2;
        let r = s.sleep(None).unwrap();
        assert_eq!(r.merges, 1);
        assert_eq!(r.merged, vec![(0, 1)]);
        assert_eq!(s.len(), 1);
        assert_eq!(s.items()[0].receipt_count, 2);
        assert_eq!(s.items()[0].stats.n(), 128);
        assert_eq!(s.items()[0].last_seen, 1.0);
    }

    #[test]
    fn pruning_prefers_weak_then_old_then_small_id() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut s = store(2, StoreConfig::default());
        let a = batch(&mut rng, 64, &[0.0, 0.0]);
        let b = batch(&mut rng, 64, &[20.0, 0.0]);
        let c = batch(&mut rng, 64, &[0.0, 20.0]);
        s.receive(&a, 0.0).unwrap();
        s.receive(&a, 5.0).unwrap();
        s.receive(&b, 2.0).unwrap();
        s.receive(&c, 1.0).unwrap();
        let r = s.sleep(Some(1)).unwrap();
        assert_eq!(r.pruned_ids, vec![2, 1]);
        assert_eq!(r.pruned_receipts, 2);
        assert_eq!(s.items()[0].id, 0);
    }

    #[test]
    fn categorical_store_uses_counts() {
        let one_hot = |cats: &[usize], k: usize| {
            DMatrix::from_fn(cats.len(), k, |i, j| if cats[i] == j { 1.0 } else { 0.0 })
        };
        let cfg = StoreConfig {
            metric: Metric::Categorical,
            ..Default::default()
        };
        let mut s = store(3, cfg);
        s.receive(&one_hot(&[0, 0, 1, 0, 0, 1], 3), 0.0).unwrap();
        let out = s.receive(&one_hot(&[0, 1, 0, 0], 3), 1.0).unwrap();
        assert!(!out.is_novel());
        let out = s.receive(&one_hot(&[2, 2, 2, 2], 3), 2.0).unwrap();
        assert!(out.is_novel());
        let projector = JlMap::gaussian(3, 2, 0.5, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert!(KnowledgeStore::new(projector, cfg).is_err());
    }

    #[test]
    fn document_round_trip_and_errors() {
        let empty = store(3, StoreConfig::default());
        assert_eq!(KnowledgeStore::from_json(&empty.to_json()).unwrap(), empty);

        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let projector = JlMap::gaussian(6, 3, 0.5, &mut rng).unwrap();
        let mut s = KnowledgeStore::new(projector, StoreConfig::default()).unwrap();
        for t in 0..20 {
            let mean = [(t % 3) as f64 * 7.0; 6];
            s.receive(&batch(&mut rng, 32, &mean), t as f64 * 0.1)
                .unwrap();
        }
        let text = s.to_json();
        let back = KnowledgeStore::from_json(&text).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.to_json(), text);

        let truncated = &text[..text.len() / 2];
        assert!(matches!(
            KnowledgeStore::from_json(truncated),
            Err(KnowledgeError::Parse(_))
        ));
        let missing = text.replacen("\"alpha\"", "\"alpah\"", 1);
        match KnowledgeStore::from_json(&missing) {
            Err(KnowledgeError::Parse(msg)) => assert!(msg.contains("alpha"), "{msg}"),
            other => panic!("expected parse error, got {other:?}"),
        }
    }
}
