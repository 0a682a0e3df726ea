//! Distribution value types and their estimation from sample batches.
//!
//! Batches are `n x d` matrices with one observation per row.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use thiserror::Error;

/// Additive smoothing mass spread uniformly over the vocabulary.
pub const CATEGORICAL_SMOOTHING: f64 = 1e-9;
/// Relative ridge added to estimated covariances.
pub const COVARIANCE_RIDGE: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DistributionError {
    #[error("empty sample")]
    Empty,
    #[error("category index {index} out of range for vocabulary of size {vocab}")]
    OutOfRange { index: usize, vocab: usize },
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid distribution: {0}")]
    Invalid(String),
    #[error("covariance is not positive definite")]
    NotPositiveDefinite,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CategoricalDist {
    probs: Vec<f64>,
}

impl CategoricalDist {
    /// Accepts probabilities summing to one within 1e-9 and renormalizes.
    pub fn new(probs: Vec<f64>) -> Result<Self, DistributionError> {
        if probs.is_empty() {
            return Err(DistributionError::Empty);
        }
        if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(DistributionError::Invalid(
                "probabilities must be finite and non-negative".into(),
            ));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(DistributionError::Invalid(format!(
                "probabilities sum to {total}, expected 1"
            )));
        }
        Ok(Self {
            probs: probs.into_iter().map(|p| p / total).collect(),
        })
    }

    pub fn vocab_size(&self) -> usize {
        self.probs.len()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }
}

/// Empirical category frequencies mixed with the uniform distribution at
/// weight [`CATEGORICAL_SMOOTHING`], so unseen categories keep a tiny mass.
pub fn estimate_categorical(
    samples: &[usize],
    vocab_size: usize,
) -> Result<CategoricalDist, DistributionError> {
    if samples.is_empty() || vocab_size == 0 {
        return Err(DistributionError::Empty);
    }
    let mut counts = vec![0u64; vocab_size];
    for &s in samples {
        if s >= vocab_size {
            return Err(DistributionError::OutOfRange {
                index: s,
                vocab: vocab_size,
            });
        }
        counts[s] += 1;
    }
    let counts: Vec<f64> = counts.into_iter().map(|c| c as f64).collect();
    smoothed_frequencies(&counts)
}

/// Smoothed frequencies from (possibly fractional) category counts.
pub fn smoothed_frequencies(counts: &[f64]) -> Result<CategoricalDist, DistributionError> {
    let n: f64 = counts.iter().sum();
    if counts.is_empty() || n <= 0.0 {
        return Err(DistributionError::Empty);
    }
    let k = counts.len() as f64;
    let mut probs: Vec<f64> = counts
        .iter()
        .map(|c| (1.0 - CATEGORICAL_SMOOTHING) * (c / n) + CATEGORICAL_SMOOTHING / k)
        .collect();
    let total: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|p| *p /= total);
    Ok(CategoricalDist { probs })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianDist {
    mu: f64,
    sigma: f64,
}

impl GaussianDist {
    /// `sigma` is the standard deviation.
    pub fn new(mu: f64, sigma: f64) -> Result<Self, DistributionError> {
        if !mu.is_finite() || !(sigma.is_finite() && sigma > 0.0) {
            return Err(DistributionError::Invalid(format!(
                "need finite mean and sigma > 0, got N({mu}, {sigma})"
            )));
        }
        Ok(Self { mu, sigma })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn variance(&self) -> f64 {
        self.sigma * self.sigma
    }

    pub fn density(&self, x: f64) -> f64 {
        let z = (x - self.mu) / self.sigma;
        (-0.5 * z * z).exp() / (self.sigma * (2.0 * std::f64::consts::PI).sqrt())
    }
}

/// Mean and covariance of a Gaussian summary, with the sample count behind it.
#[derive(Debug, Clone, PartialEq)]
pub struct MvnSummary {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
    n: u64,
}

impl MvnSummary {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>, n: u64) -> Result<Self, DistributionError> {
        let d = mean.len();
        if d == 0 {
            return Err(DistributionError::Empty);
        }
        if cov.nrows() != d || cov.ncols() != d {
            return Err(DistributionError::DimensionMismatch {
                expected: d,
                got: cov.nrows(),
            });
        }
        if mean.iter().chain(cov.iter()).any(|v| !v.is_finite()) {
            return Err(DistributionError::Invalid("non-finite entries".into()));
        }
        let scale = cov.amax().max(1.0);
        for i in 0..d {
            for j in 0..i {
                if (cov[(i, j)] - cov[(j, i)]).abs() > 1e-10 * scale {
                    return Err(DistributionError::Invalid(format!(
                        "covariance not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        let summary = Self { mean, cov, n };
        summary.cholesky()?;
        Ok(summary)
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn cholesky(&self) -> Result<Cholesky<f64, Dyn>, DistributionError> {
        Cholesky::new(self.cov.clone()).ok_or(DistributionError::NotPositiveDefinite)
    }
}

/// Column means and unbiased covariance plus a small ridge.
pub fn estimate_mvn(batch: &DMatrix<f64>) -> Result<MvnSummary, DistributionError> {
    let n = batch.nrows();
    if n < 2 {
        return Err(DistributionError::TooFewSamples { needed: 2, got: n });
    }
    if batch.ncols() == 0 {
        return Err(DistributionError::Empty);
    }
    let mean = batch.row_mean().transpose();
    let mut centered = batch.clone();
    for mut row in centered.row_iter_mut() {
        row -= mean.transpose();
    }
    let cov = centered.transpose() * &centered / (n as f64 - 1.0);
    finish_summary(mean, cov, n as u64)
}

fn finish_summary(
    mean: DVector<f64>,
    mut cov: DMatrix<f64>,
    n: u64,
) -> Result<MvnSummary, DistributionError> {
    let d = mean.len();
    // exact symmetry regardless of accumulation order
    for i in 0..d {
        for j in 0..i {
            let avg = 0.5 * (cov[(i, j)] + cov[(j, i)]);
            cov[(i, j)] = avg;
            cov[(j, i)] = avg;
        }
    }
    let trace = cov.trace();
    let ridge = if trace > 0.0 {
        COVARIANCE_RIDGE * trace / d as f64
    } else {
        COVARIANCE_RIDGE
    };
    for i in 0..d {
        cov[(i, i)] += ridge;
    }
    MvnSummary::new(mean, cov, n)
}

/// Mergeable raw moments: count, sum and summed outer products.
#[derive(Debug, Clone, PartialEq)]
pub struct SufficientStats {
    n: u64,
    sum: DVector<f64>,
    sum_outer: DMatrix<f64>,
}

impl SufficientStats {
    pub fn empty(dim: usize) -> Self {
        Self {
            n: 0,
            sum: DVector::zeros(dim),
            sum_outer: DMatrix::zeros(dim, dim),
        }
    }

    pub fn from_parts(
        n: u64,
        sum: DVector<f64>,
        sum_outer: DMatrix<f64>,
    ) -> Result<Self, DistributionError> {
        let d = sum.len();
        if sum_outer.nrows() != d || sum_outer.ncols() != d {
            return Err(DistributionError::DimensionMismatch {
                expected: d,
                got: sum_outer.nrows(),
            });
        }
        if sum.iter().chain(sum_outer.iter()).any(|v| !v.is_finite()) {
            return Err(DistributionError::Invalid("non-finite moments".into()));
        }
        Ok(Self { n, sum, sum_outer })
    }

    pub fn from_batch(batch: &DMatrix<f64>) -> Self {
        Self {
            n: batch.nrows() as u64,
            sum: batch.row_sum().transpose(),
            sum_outer: batch.transpose() * batch,
        }
    }

    pub fn dim(&self) -> usize {
        self.sum.len()
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn sum(&self) -> &DVector<f64> {
        &self.sum
    }

    pub fn sum_outer(&self) -> &DMatrix<f64> {
        &self.sum_outer
    }

    pub fn merge(&self, other: &Self) -> Result<Self, DistributionError> {
        merge_stats(self, other)
    }

    /// Converts to a summary with the unbiased divisor and the usual ridge.
    pub fn to_mvn(&self) -> Result<MvnSummary, DistributionError> {
        if self.n < 2 {
            return Err(DistributionError::TooFewSamples {
                needed: 2,
                got: self.n as usize,
            });
        }
        let n = self.n as f64;
        let mean = &self.sum / n;
        let cov = (&self.sum_outer - &mean * mean.transpose() * n) / (n - 1.0);
        finish_summary(mean, cov, self.n)
    }
}

pub fn merge_stats(
    a: &SufficientStats,
    b: &SufficientStats,
) -> Result<SufficientStats, DistributionError> {
    if a.dim() != b.dim() {
        return Err(DistributionError::DimensionMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    Ok(SufficientStats {
        n: a.n + b.n,
        sum: &a.sum + &b.sum,
        sum_outer: &a.sum_outer + &b.sum_outer,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn balanced_categorical() {
        let c = estimate_categorical(&[0, 0, 1, 1], 2).unwrap();
        assert!((c.probs()[0] - 0.5).abs() < 1e-9);
        assert!((c.probs()[1] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn unseen_category_gets_half_the_smoothing_mass() {
        let c = estimate_categorical(&[0], 2).unwrap();
        assert!((c.probs()[1] - 5e-10).abs() < 1e-20);
        assert!((c.probs()[0] - (1.0 - 5e-10)).abs() < 1e-15);
        assert!((c.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn categorical_errors() {
        assert_eq!(
            estimate_categorical(&[2], 2),
            Err(DistributionError::OutOfRange { index: 2, vocab: 2 })
        );
        assert_eq!(estimate_categorical(&[], 2), Err(DistributionError::Empty));
    }

    #[test]
    fn degenerate_batch_gets_ridge_floor() {
        let batch = DMatrix::<f64>::zeros(2, 2);
        let s = estimate_mvn(&batch).unwrap();
        assert_eq!(s.mean().as_slice(), &[0.0, 0.0]);
        assert_eq!(s.cov(), &(DMatrix::identity(2, 2) * 1e-10));
        assert_eq!(s.n(), 2);
    }

    #[test]
    fn single_row_rejected() {
        assert!(matches!(
            estimate_mvn(&DMatrix::<f64>::zeros(1, 3)),
            Err(DistributionError::TooFewSamples { .. })
        ));
    }

    #[test]
    fn standard_normal_concentrates() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let batch = DMatrix::from_fn(50_000, 3, |_, _| StandardNormal.sample(&mut rng));
        let s = estimate_mvn(&batch).unwrap();
        for i in 0..3 {
            assert!(s.mean()[i].abs() < 0.02);
            for j in 0..3 {
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((s.cov()[(i, j)] - target).abs() < 0.03);
            }
        }
    }

    #[test]
    fn merge_identity_and_commutativity() {
        let a = SufficientStats::from_batch(&DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]));
        let b = SufficientStats::from_batch(&DMatrix::from_row_slice(
            3,
            2,
            &[5.0, 6.0, 7.0, 8.0, 9.0, 1.0],
        ));
        assert_eq!(merge_stats(&a, &SufficientStats::empty(2)).unwrap(), a);
        assert_eq!(merge_stats(&a, &b).unwrap(), merge_stats(&b, &a).unwrap());
        assert!(merge_stats(&a, &SufficientStats::empty(3)).is_err());
    }

    #[test]
    fn merge_matches_concatenation() {
        let b1 = DMatrix::from_row_slice(3, 2, &[1.0, -2.0, 3.0, 4.0, 0.0, 7.0]);
        let b2 = DMatrix::from_row_slice(2, 2, &[5.0, 6.0, -8.0, 2.0]);
        let cat =
            DMatrix::from_row_slice(5, 2, &[1.0, -2.0, 3.0, 4.0, 0.0, 7.0, 5.0, 6.0, -8.0, 2.0]);
        let merged = merge_stats(
            &SufficientStats::from_batch(&b1),
            &SufficientStats::from_batch(&b2),
        )
        .unwrap();
        assert_eq!(merged, SufficientStats::from_batch(&cat));
    }

    proptest! {
        #[test]
        fn stats_route_matches_direct_estimate(
            seed in any::<u64>(), n in 2usize..40, d in 1usize..5, shift in -10.0f64..10.0
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let batch = DMatrix::from_fn(n, d, |_, _| {
                let z: f64 = StandardNormal.sample(&mut rng);
                shift + z
            });
            let direct = estimate_mvn(&batch).unwrap();
            let via = SufficientStats::from_batch(&batch).to_mvn().unwrap();
            for (a, b) in direct.mean().iter().zip(via.mean().iter()) {
                prop_assert!((a - b).abs() < 1e-10);
            }
            for (a, b) in direct.cov().iter().zip(via.cov().iter()) {
                prop_assert!((a - b).abs() < 1e-10);
            }
            prop_assert!(via.cholesky().is_ok());
        }

        #[test]
        fn smoothed_probs_sum_to_one(samples in proptest::collection::vec(0usize..7, 1..60)) {
            let c = estimate_categorical(&samples, 7).unwrap();
            prop_assert!((c.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
