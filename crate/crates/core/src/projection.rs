//! Gaussian random projection with the Johnson-Lindenstrauss dimension bound.
//!
//! A map sends `x` in `R^d` to `A x / sqrt(k)` where `A` is `k x d` with
//! i.i.d. standard normal entries. For `n` points and distortion `eps`, any
//! `k >= 4 ln(n) / (eps^2/2 - eps^3/3)` admits a map with
//! `(1-eps)|u-v|^2 <= |f(u)-f(v)|^2 <= (1+eps)|u-v|^2` for every pair;
//! [`find_valid_map`] draws until [`verify`] confirms it.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_MAX_RETRIES: usize = 16;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProjectionError {
    #[error("epsilon must lie in (0, 1), got {0}")]
    Epsilon(f64),
    #[error("need at least two points, got {0}")]
    TooFewPoints(usize),
    #[error("dimension mismatch: map expects {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid map: {0}")]
    Invalid(String),
    #[error("no valid map within {retries} draws (best ratios {best_low} .. {best_high})")]
    RetriesExhausted {
        retries: usize,
        best_low: f64,
        best_high: f64,
    },
}

fn check_epsilon(epsilon: f64) -> Result<(), ProjectionError> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(ProjectionError::Epsilon(epsilon));
    }
    Ok(())
}

/// Smallest target dimension the bound allows for `n` points.
pub fn jl_min_dimension(n: usize, epsilon: f64) -> Result<usize, ProjectionError> {
    check_epsilon(epsilon)?;
    if n < 2 {
        return Err(ProjectionError::TooFewPoints(n));
    }
    let denom = epsilon * epsilon / 2.0 - epsilon.powi(3) / 3.0;
    Ok(((4.0 * (n as f64).ln() / denom).ceil() as usize).max(1))
}

/// A linear map from `R^d` to `R^k`. `matrix == None` is the identity
/// (used when the bound would not shrink the dimension).
#[derive(Debug, Clone, PartialEq)]
pub struct JlMap {
    d: usize,
    k: usize,
    epsilon: f64,
    matrix: Option<DMatrix<f64>>,
}

impl JlMap {
    /// Draws `A` row by row from the caller's random source.
    pub fn gaussian<R: Rng + ?Sized>(
        d: usize,
        k: usize,
        epsilon: f64,
        rng: &mut R,
    ) -> Result<Self, ProjectionError> {
        check_epsilon(epsilon)?;
        if d == 0 || k == 0 {
            return Err(ProjectionError::Invalid(format!(
                "need d, k >= 1, got {d}, {k}"
            )));
        }
        let entries: Vec<f64> = (0..k * d).map(|_| StandardNormal.sample(rng)).collect();
        Ok(Self {
            d,
            k,
            epsilon,
            matrix: Some(DMatrix::from_row_slice(k, d, &entries)),
        })
    }

    pub fn identity(d: usize, epsilon: f64) -> Result<Self, ProjectionError> {
        check_epsilon(epsilon)?;
        if d == 0 {
            return Err(ProjectionError::Invalid("need d >= 1".into()));
        }
        Ok(Self {
            d,
            k: d,
            epsilon,
            matrix: None,
        })
    }

    /// Wraps an explicit `k x d` matrix; the `1/sqrt(k)` scale is applied on use.
    pub fn from_matrix(matrix: DMatrix<f64>, epsilon: f64) -> Result<Self, ProjectionError> {
        check_epsilon(epsilon)?;
        if matrix.is_empty() || matrix.iter().any(|v| !v.is_finite()) {
            return Err(ProjectionError::Invalid(
                "matrix must be non-empty and finite".into(),
            ));
        }
        Ok(Self {
            d: matrix.ncols(),
            k: matrix.nrows(),
            epsilon,
            matrix: Some(matrix),
        })
    }

    /// Map sized for `n` points: the bound's `k`, or identity when `k >= d`.
    pub fn for_points<R: Rng + ?Sized>(
        d: usize,
        n: usize,
        epsilon: f64,
        rng: &mut R,
    ) -> Result<Self, ProjectionError> {
        let k = jl_min_dimension(n, epsilon)?;
        if k >= d {
            Self::identity(d, epsilon)
        } else {
            Self::gaussian(d, k, epsilon, rng)
        }
    }

    pub fn source_dim(&self) -> usize {
        self.d
    }

    pub fn target_dim(&self) -> usize {
        self.k
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn matrix(&self) -> Option<&DMatrix<f64>> {
        self.matrix.as_ref()
    }

    pub fn is_identity(&self) -> bool {
        self.matrix.is_none()
    }

    pub fn scale(&self) -> f64 {
        if self.is_identity() {
            1.0
        } else {
            1.0 / (self.k as f64).sqrt()
        }
    }

    pub fn apply(&self, x: &DVector<f64>) -> Result<DVector<f64>, ProjectionError> {
        if x.len() != self.d {
            return Err(ProjectionError::DimensionMismatch {
                expected: self.d,
                got: x.len(),
            });
        }
        Ok(match &self.matrix {
            None => x.clone(),
            Some(a) => a * x * self.scale(),
        })
    }

    /// Projects every row of an `n x d` batch.
    pub fn apply_rows(&self, batch: &DMatrix<f64>) -> Result<DMatrix<f64>, ProjectionError> {
        if batch.ncols() != self.d {
            return Err(ProjectionError::DimensionMismatch {
                expected: self.d,
                got: batch.ncols(),
            });
        }
        Ok(match &self.matrix {
            None => batch.clone(),
            Some(a) => batch * a.transpose() * self.scale(),
        })
    }
}

/// Outcome of an all-pairs distortion check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub ok: bool,
    /// Smallest `|f(u)-f(v)|^2 / |u-v|^2` over non-coincident pairs.
    pub worst_ratio_low: f64,
    /// Largest such ratio.
    pub worst_ratio_high: f64,
    pub pairs_checked: usize,
}

/// Checks the squared-distance sandwich for every pair of rows in `points`.
/// Coincident pairs are skipped.
pub fn verify(map: &JlMap, points: &DMatrix<f64>) -> Result<VerifyReport, ProjectionError> {
    if points.nrows() < 2 {
        return Err(ProjectionError::TooFewPoints(points.nrows()));
    }
    let projected = map.apply_rows(points)?;
    let eps = map.epsilon();
    let mut low = f64::INFINITY;
    let mut high = f64::NEG_INFINITY;
    let mut ok = true;
    let mut pairs = 0;
    for i in 0..points.nrows() {
        for j in (i + 1)..points.nrows() {
            let orig = (points.row(i) - points.row(j)).norm_squared();
            if orig == 0.0 {
                continue;
            }
            let proj = (projected.row(i) - projected.row(j)).norm_squared();
            let ratio = proj / orig;
            low = low.min(ratio);
            high = high.max(ratio);
            pairs += 1;
            if proj < (1.0 - eps) * orig || proj > (1.0 + eps) * orig {
                ok = false;
            }
        }
    }
    if pairs == 0 {
        low = 1.0;
        high = 1.0;
    }
    Ok(VerifyReport {
        ok,
        worst_ratio_low: low,
        worst_ratio_high: high,
        pairs_checked: pairs,
    })
}

/// Draws maps sized by [`jl_min_dimension`] until one passes [`verify`].
/// Returns the map and the number of draws used.
pub fn find_valid_map<R: Rng + ?Sized>(
    points: &DMatrix<f64>,
    epsilon: f64,
    max_retries: usize,
    rng: &mut R,
) -> Result<(JlMap, usize), ProjectionError> {
    check_epsilon(epsilon)?;
    if points.nrows() < 2 {
        return Err(ProjectionError::TooFewPoints(points.nrows()));
    }
    let max_retries = max_retries.max(1);
    // best = the draw whose worst ratio strays least from 1
    let mut best: Option<(f64, f64, f64)> = None;
    for attempt in 1..=max_retries {
        let map = JlMap::for_points(points.ncols(), points.nrows(), epsilon, rng)?;
        let report = verify(&map, points)?;
        if report.ok {
            return Ok((map, attempt));
        }
        let stray = (1.0 - report.worst_ratio_low).max(report.worst_ratio_high - 1.0);
        if best.is_none_or(|(s, _, _)| stray < s) {
            best = Some((stray, report.worst_ratio_low, report.worst_ratio_high));
        }
    }
    let (_, best_low, best_high) = best.expect("at least one draw");
    Err(ProjectionError::RetriesExhausted {
        retries: max_retries,
        best_low,
        best_high,
    })
}
