//! Ground-truth topic sources that supply sample batches to agents.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::distr::weighted::WeightedIndex;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvironmentError {
    #[error("invalid environment: {0}")]
    Invalid(String),
}

/// A batch that failed the schema gate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SchemaError {
    #[error("expected {expected} columns, got {got}")]
    Width { expected: usize, got: usize },
    #[error("need at least 2 rows, got {0}")]
    TooFewRows(usize),
    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("row {0} is not a one-hot category indicator")]
    NotOneHot(usize),
}

/// Payload family an environment emits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PayloadKind {
    #[default]
    Gaussian,
    /// Rows are one-hot encodings of category draws.
    Categorical,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TopicSource {
    Gaussian {
        mean: DVector<f64>,
        /// Lower Cholesky factor of the covariance.
        chol: DMatrix<f64>,
    },
    Categorical {
        probs: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Topic {
    pub id: usize,
    pub source: TopicSource,
}

impl Topic {
    pub fn gaussian(
        id: usize,
        mean: Vec<f64>,
        cov: DMatrix<f64>,
    ) -> Result<Self, EnvironmentError> {
        let d = mean.len();
        if d == 0 || cov.nrows() != d || cov.ncols() != d {
            return Err(EnvironmentError::Invalid(format!(
                "topic {id}: covariance must be {d} x {d}"
            )));
        }
        let chol = Cholesky::new(cov).ok_or_else(|| {
            EnvironmentError::Invalid(format!("topic {id}: covariance not positive definite"))
        })?;
        Ok(Self {
            id,
            source: TopicSource::Gaussian {
                mean: DVector::from_vec(mean),
                chol: chol.l(),
            },
        })
    }

    pub fn isotropic(id: usize, mean: Vec<f64>, sigma: f64) -> Result<Self, EnvironmentError> {
        let d = mean.len();
        Self::gaussian(id, mean, DMatrix::identity(d, d) * (sigma * sigma))
    }

    pub fn categorical(id: usize, probs: Vec<f64>) -> Result<Self, EnvironmentError> {
        let total: f64 = probs.iter().sum();
        if probs.is_empty()
            || probs.iter().any(|p| p.is_nan() || *p < 0.0)
            || (total - 1.0).abs() > 1e-9
        {
            return Err(EnvironmentError::Invalid(format!(
                "topic {id}: category probabilities must be non-negative and sum to 1"
            )));
        }
        Ok(Self {
            id,
            source: TopicSource::Categorical { probs },
        })
    }

    pub fn dim(&self) -> usize {
        match &self.source {
            TopicSource::Gaussian { mean, .. } => mean.len(),
            TopicSource::Categorical { probs } => probs.len(),
        }
    }

    fn kind(&self) -> PayloadKind {
        match self.source {
            TopicSource::Gaussian { .. } => PayloadKind::Gaussian,
            TopicSource::Categorical { .. } => PayloadKind::Categorical,
        }
    }

    /// Draws `n` rows; categorical rows are one-hot.
    pub fn draw<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> DMatrix<f64> {
        match &self.source {
            TopicSource::Gaussian { mean, chol } => {
                let d = mean.len();
                let mut out = DMatrix::zeros(n, d);
                for i in 0..n {
                    let z = DVector::from_iterator(d, (0..d).map(|_| StandardNormal.sample(rng)));
                    let x = mean + chol * z;
                    out.set_row(i, &x.transpose());
                }
                out
            }
            TopicSource::Categorical { probs } => {
                let pick = WeightedIndex::new(probs).expect("validated probabilities");
                let mut out = DMatrix::zeros(n, probs.len());
                for i in 0..n {
                    out[(i, pick.sample(rng))] = 1.0;
                }
                out
            }
        }
    }
}

/// The world agents collect from: a weighted set of topic sources.
#[derive(Debug, Clone, PartialEq)]
pub struct Environment {
    payload_dim: usize,
    kind: PayloadKind,
    topics: Vec<Topic>,
    batch_size: usize,
    weights: Vec<f64>,
    corrupt_rate: f64,
}

impl Environment {
    /// `weights` default to uniform.
    pub fn new(
        topics: Vec<Topic>,
        batch_size: usize,
        weights: Option<Vec<f64>>,
    ) -> Result<Self, EnvironmentError> {
        let first = topics
            .first()
            .ok_or_else(|| EnvironmentError::Invalid("need at least one topic".into()))?;
        let payload_dim = first.dim();
        let kind = first.kind();
        if topics
            .iter()
            .any(|t| t.dim() != payload_dim || t.kind() != kind)
        {
            return Err(EnvironmentError::Invalid(
                "all topics must share payload kind and dimension".into(),
            ));
        }
        if batch_size < 2 {
            return Err(EnvironmentError::Invalid(format!(
                "batch_size must be >= 2, got {batch_size}"
            )));
        }
        let weights = weights.unwrap_or_else(|| vec![1.0 / topics.len() as f64; topics.len()]);
        let total: f64 = weights.iter().sum();
        if weights.len() != topics.len()
            || weights.iter().any(|w| w.is_nan() || *w < 0.0)
            || (total - 1.0).abs() > 1e-9
        {
            return Err(EnvironmentError::Invalid(
                "weights must be one non-negative entry per topic summing to 1".into(),
            ));
        }
        Ok(Self {
            payload_dim,
            kind,
            topics,
            batch_size,
            weights,
            corrupt_rate: 0.0,
        })
    }

    /// Fraction of arrivals that carry a corrupted (non-finite) value.
    pub fn with_corrupt_rate(mut self, rate: f64) -> Result<Self, EnvironmentError> {
        if !(0.0..=1.0).contains(&rate) {
            return Err(EnvironmentError::Invalid(format!(
                "corrupt_rate must lie in [0, 1], got {rate}"
            )));
        }
        self.corrupt_rate = rate;
        Ok(self)
    }

    pub fn payload_dim(&self) -> usize {
        self.payload_dim
    }

    pub fn kind(&self) -> PayloadKind {
        self.kind
    }

    pub fn topics(&self) -> &[Topic] {
        &self.topics
    }

    pub fn batch_size(&self) -> usize {
        self.batch_size
    }

    pub fn pick_topic<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        WeightedIndex::new(&self.weights)
            .expect("validated weights")
            .sample(rng)
    }

    /// A fresh batch from a given topic.
    pub fn query<R: Rng + ?Sized>(&self, topic: usize, rng: &mut R) -> DMatrix<f64> {
        self.topics[topic].draw(self.batch_size, rng)
    }

    /// One arrival: a randomly chosen topic and a batch drawn from it,
    /// occasionally corrupted.
    pub fn arrival<R: Rng + ?Sized>(&self, rng: &mut R) -> (usize, DMatrix<f64>) {
        let topic = self.pick_topic(rng);
        let mut batch = self.query(topic, rng);
        if self.corrupt_rate > 0.0 && rng.random::<f64>() < self.corrupt_rate {
            let row = rng.random_range(0..batch.nrows());
            let col = rng.random_range(0..batch.ncols());
            batch[(row, col)] = f64::NAN;
        }
        (topic, batch)
    }

    /// Schema gate: right width, at least two rows, finite values, and
    /// one-hot rows for categorical payloads.
    pub fn validate_batch(&self, batch: &DMatrix<f64>) -> Result<(), SchemaError> {
        if batch.ncols() != self.payload_dim {
            return Err(SchemaError::Width {
                expected: self.payload_dim,
                got: batch.ncols(),
            });
        }
        if batch.nrows() < 2 {
            return Err(SchemaError::TooFewRows(batch.nrows()));
        }
        for (i, row) in batch.row_iter().enumerate() {
            if let Some(col) = row.iter().position(|v| !v.is_finite()) {
                return Err(SchemaError::NonFinite { row: i, col });
            }
            if self.kind == PayloadKind::Categorical {
                let ones = row.iter().filter(|v| **v == 1.0).count();
                let zeros = row.iter().filter(|v| **v == 0.0).count();
                if ones != 1 || ones + zeros != row.len() {
                    return Err(SchemaError::NotOneHot(i));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn gaussian_topic_moments() {
        let cov = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let t = Topic::gaussian(0, vec![1.0, -1.0], cov.clone()).unwrap();
        let b = t.draw(40_000, &mut ChaCha8Rng::seed_from_u64(1));
        let s = crate::distributions::estimate_mvn(&b).unwrap();
        assert!((s.mean() - DVector::from_vec(vec![1.0, -1.0])).amax() < 0.03);
        assert!((s.cov() - cov).amax() < 0.05);
    }

    #[test]
    fn categorical_rows_are_one_hot() {
        let t = Topic::categorical(0, vec![0.2, 0.8]).unwrap();
        let env = Environment::new(vec![t], 50, None).unwrap();
        let b = env.query(0, &mut ChaCha8Rng::seed_from_u64(2));
        assert!(env.validate_batch(&b).is_ok());
        assert!(b.row_iter().all(|r| r.sum() == 1.0));
    }

    #[test]
    fn schema_gate_rejects_bad_batches() {
        let env = Environment::new(
            vec![Topic::isotropic(0, vec![0.0; 3], 1.0).unwrap()],
            4,
            None,
        )
        .unwrap();
        assert!(matches!(
            env.validate_batch(&DMatrix::zeros(4, 2)),
            Err(SchemaError::Width {
                expected: 3,
                got: 2
            })
        ));
        let mut b = DMatrix::zeros(4, 3);
        b[(2, 1)] = f64::INFINITY;
        assert_eq!(
            env.validate_batch(&b),
            Err(SchemaError::NonFinite { row: 2, col: 1 })
        );
    }

    #[test]
    fn corrupted_arrivals_fail_the_gate() {
        let env = Environment::new(
            vec![Topic::isotropic(0, vec![0.0; 2], 1.0).unwrap()],
            8,
            None,
        )
        .unwrap()
        .with_corrupt_rate(1.0)
        .unwrap();
        let (_, b) = env.arrival(&mut ChaCha8Rng::seed_from_u64(3));
        assert!(env.validate_batch(&b).is_err());
    }

    #[test]
    fn invalid_environments() {
        assert!(Environment::new(vec![], 4, None).is_err());
        let t = || Topic::isotropic(0, vec![0.0; 2], 1.0).unwrap();
        assert!(Environment::new(vec![t()], 1, None).is_err());
        assert!(Environment::new(vec![t(), t()], 4, Some(vec![0.5, 0.6])).is_err());
        let other = Topic::isotropic(1, vec![0.0; 3], 1.0).unwrap();
        assert!(Environment::new(vec![t(), other], 4, None).is_err());
    }
}
