//! Bhattacharyya coefficient and distance.
//!
//! The coefficient `rho` measures the overlap of two distributions,
//! `sum sqrt(p q)` or `integral sqrt(p(x) q(x)) dx`, and the distance is
//! `-ln(rho)`. Closed forms are provided for categorical, univariate normal
//! and multivariate normal inputs; [`bc_quadrature`] integrates arbitrary
//! densities and serves as an independent check on the closed forms.

use nalgebra::DVector;
use thiserror::Error;

use crate::distributions::{CategoricalDist, GaussianDist, MvnSummary};

/// Largest tolerated floating-point overshoot of `rho` above one.
pub const RHO_OVERSHOOT: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DistanceError {
    #[error("vocabulary mismatch: {0} vs {1}")]
    VocabMismatch(usize, usize),
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("need at least two distributions, got {0}")]
    TooFewPopulations(usize),
    #[error("coefficient {0} exceeds one beyond rounding tolerance")]
    Overshoot(f64),
    #[error("negative distance {0}")]
    NegativeDistance(f64),
    #[error("{0} covariance failed Cholesky factorization")]
    NotPositiveDefinite(&'static str),
    #[error("quadrature did not reach tolerance (estimate {estimate}, error {error:e})")]
    Quadrature { estimate: f64, error: f64 },
}

/// A coefficient and its distance, `distance = -ln(rho)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Divergence {
    rho: f64,
    distance: f64,
}

impl Divergence {
    pub fn from_rho(rho: f64) -> Result<Self, DistanceError> {
        let rho = clamp_rho(rho)?;
        let distance = if rho == 0.0 {
            f64::INFINITY
        } else {
            // + 0.0 folds -0.0 into 0.0
            (-rho.ln()).max(0.0) + 0.0
        };
        Ok(Self { rho, distance })
    }

    pub fn from_distance(distance: f64) -> Result<Self, DistanceError> {
        if distance.is_nan() || distance < -RHO_OVERSHOOT {
            return Err(DistanceError::NegativeDistance(distance));
        }
        let distance = distance.max(0.0) + 0.0;
        Ok(Self {
            rho: (-distance).exp(),
            distance,
        })
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn distance(&self) -> f64 {
        self.distance
    }
}

fn clamp_rho(rho: f64) -> Result<f64, DistanceError> {
    if rho.is_nan() || rho > 1.0 + RHO_OVERSHOOT {
        return Err(DistanceError::Overshoot(rho));
    }
    Ok(rho.clamp(0.0, 1.0))
}

pub fn bc_discrete(p: &CategoricalDist, q: &CategoricalDist) -> Result<Divergence, DistanceError> {
    if p.vocab_size() != q.vocab_size() {
        return Err(DistanceError::VocabMismatch(p.vocab_size(), q.vocab_size()));
    }
    let rho: f64 = p
        .probs()
        .iter()
        .zip(q.probs())
        .map(|(a, b)| (a * b).sqrt())
        .sum();
    Divergence::from_rho(rho)
}

pub fn bc_gaussian(p: &GaussianDist, q: &GaussianDist) -> Result<Divergence, DistanceError> {
    let (vp, vq) = (p.variance(), q.variance());
    let diff = p.mu() - q.mu();
    let shape = 0.25 * (0.25 * (vp / vq + vq / vp + 2.0)).ln();
    let location = 0.25 * diff * diff / (vp + vq);
    Divergence::from_distance(shape + location)
}

/// Closed form via Cholesky factors: the Mahalanobis term is a triangular
/// solve and every log-determinant is a sum of log pivots.
pub fn bc_mvn(a: &MvnSummary, b: &MvnSummary) -> Result<Divergence, DistanceError> {
    if a.dim() != b.dim() {
        return Err(DistanceError::DimensionMismatch(a.dim(), b.dim()));
    }
    let chol_a = a
        .cholesky()
        .map_err(|_| DistanceError::NotPositiveDefinite("first"))?;
    let chol_b = b
        .cholesky()
        .map_err(|_| DistanceError::NotPositiveDefinite("second"))?;
    let avg = (a.cov() + b.cov()) * 0.5;
    let chol =
        nalgebra::Cholesky::new(avg).ok_or(DistanceError::NotPositiveDefinite("averaged"))?;

    let diff: DVector<f64> = a.mean() - b.mean();
    let whitened = chol
        .l_dirty()
        .solve_lower_triangular(&diff)
        .ok_or(DistanceError::NotPositiveDefinite("averaged"))?;
    let mahalanobis = whitened.norm_squared();

    let log_det = |l: &nalgebra::DMatrix<f64>| -> f64 {
        2.0 * (0..l.nrows()).map(|i| l[(i, i)].ln()).sum::<f64>()
    };
    let ld = log_det(chol.l_dirty());
    let ld_a = log_det(chol_a.l_dirty());
    let ld_b = log_det(chol_b.l_dirty());

    let distance = mahalanobis / 8.0 + 0.5 * (ld - 0.5 * (ld_a + ld_b));
    Divergence::from_distance(distance)
}

/// Default absolute tolerance of [`bc_quadrature`].
pub const QUADRATURE_TOL: f64 = 1e-10;
const QUADRATURE_MAX_INTERVALS: usize = 4000;

/// Coefficient `integral sqrt(p q)` over `[lo, hi]` by adaptive Gauss-Kronrod.
pub fn bc_quadrature<P, Q>(
    density_p: P,
    density_q: Q,
    lo: f64,
    hi: f64,
) -> Result<f64, DistanceError>
where
    P: Fn(f64) -> f64,
    Q: Fn(f64) -> f64,
{
    let integrand = |x: f64| (density_p(x).max(0.0) * density_q(x).max(0.0)).sqrt();
    let (estimate, error) = integrate(integrand, lo, hi, QUADRATURE_TOL, QUADRATURE_MAX_INTERVALS);
    if !(estimate.is_finite() && error <= QUADRATURE_TOL) {
        return Err(DistanceError::Quadrature { estimate, error });
    }
    Ok(estimate)
}

// 7-point Gauss / 15-point Kronrod nodes and weights on [-1, 1].
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn kronrod15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for (j, x) in XGK.iter().take(7).enumerate() {
        let dx = half * x;
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * pair;
        // odd Kronrod indices are the Gauss nodes
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

/// Globally adaptive integration: bisects the interval with the largest
/// error estimate until the summed estimate meets `tol`.
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    lo: f64,
    hi: f64,
    tol: f64,
    max_intervals: usize,
) -> (f64, f64) {
    if hi <= lo {
        return (0.0, 0.0);
    }
    let (v, e) = kronrod15(&f, lo, hi);
    let mut intervals = vec![(lo, hi, v, e)];
    loop {
        let total_err: f64 = intervals.iter().map(|i| i.3).sum();
        if total_err <= tol || intervals.len() >= max_intervals {
            let total: f64 = intervals.iter().map(|i| i.2).sum();
            return (total, total_err);
        }
        let worst = intervals
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .map(|(i, _)| i)
            .expect("non-empty");
        let (a, b, _, _) = intervals.swap_remove(worst);
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            let total: f64 = intervals.iter().map(|i| i.2).sum();
            return (total, total_err);
        }
        let (v1, e1) = kronrod15(&f, a, mid);
        let (v2, e2) = kronrod15(&f, mid, b);
        intervals.push((a, mid, v1, e1));
        intervals.push((mid, b, v2, e2));
    }
}

/// M-population coefficient `sum_i (prod_j p_{j,i})^{1/M}`.
pub fn bc_multi(dists: &[CategoricalDist]) -> Result<f64, DistanceError> {
    if dists.len() < 2 {
        return Err(DistanceError::TooFewPopulations(dists.len()));
    }
    let k = dists[0].vocab_size();
    if let Some(bad) = dists.iter().find(|d| d.vocab_size() != k) {
        return Err(DistanceError::VocabMismatch(k, bad.vocab_size()));
    }
    let inv_m = 1.0 / dists.len() as f64;
    let rho: f64 = (0..k)
        .map(|i| {
            dists
                .iter()
                .map(|d| d.probs()[i])
                .product::<f64>()
                .powf(inv_m)
        })
        .sum();
    clamp_rho(rho)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    fn cat(p: &[f64]) -> CategoricalDist {
        CategoricalDist::new(p.to_vec()).unwrap()
    }

    fn gauss(mu: f64, sigma: f64) -> GaussianDist {
        GaussianDist::new(mu, sigma).unwrap()
    }

    fn mvn1(mu: f64, var: f64) -> MvnSummary {
        MvnSummary::new(
            DVector::from_element(1, mu),
            DMatrix::from_element(1, 1, var),
            2,
        )
        .unwrap()
    }

    #[test]
    fn discrete_worked_values() {
        let same = bc_discrete(&cat(&[0.5, 0.5]), &cat(&[0.5, 0.5])).unwrap();
        assert!((same.rho() - 1.0).abs() < 1e-15);
        assert_eq!(same.distance(), 0.0);

        let disjoint = bc_discrete(&cat(&[1.0, 0.0]), &cat(&[0.0, 1.0])).unwrap();
        assert_eq!(disjoint.rho(), 0.0);
        assert_eq!(disjoint.distance(), f64::INFINITY);

        let d = bc_discrete(&cat(&[0.5, 0.5]), &cat(&[0.9, 0.1])).unwrap();
        let oracle = 0.45f64.sqrt() + 0.05f64.sqrt();
        assert!((d.rho() - oracle).abs() < 1e-15);
        assert!((d.rho() - 0.894427).abs() < 1e-6);
        assert!((d.distance() - 0.111572).abs() < 1e-6);
    }

    #[test]
    fn discrete_vocab_mismatch() {
        assert_eq!(
            bc_discrete(&cat(&[1.0]), &cat(&[0.5, 0.5])),
            Err(DistanceError::VocabMismatch(1, 2))
        );
    }

    #[test]
    fn overshoot_is_clamped_or_rejected() {
        assert_eq!(Divergence::from_rho(1.0 + 5e-13).unwrap().rho(), 1.0);
        assert!(matches!(
            Divergence::from_rho(1.0 + 1e-9),
            Err(DistanceError::Overshoot(_))
        ));
    }

    #[test]
    fn gaussian_worked_values() {
        let same = bc_gaussian(&gauss(3.0, 2.0), &gauss(3.0, 2.0)).unwrap();
        assert_eq!(same.distance(), 0.0);
        assert_eq!(same.rho(), 1.0);

        let shifted = bc_gaussian(&gauss(0.0, 1.0), &gauss(2.0, 1.0)).unwrap();
        assert!((shifted.distance() - 0.5).abs() < 1e-15);
        let quad = bc_quadrature(
            |x| gauss(0.0, 1.0).density(x),
            |x| gauss(2.0, 1.0).density(x),
            -12.0,
            14.0,
        )
        .unwrap();
        assert!((quad - (-0.5f64).exp()).abs() < 1e-8);
        assert!((shifted.rho() - 0.606531).abs() < 1e-6);

        let wider = bc_gaussian(&gauss(0.0, 1.0), &gauss(0.0, 2.0)).unwrap();
        assert!((wider.distance() - 0.25 * (25.0f64 / 16.0).ln()).abs() < 1e-15);
        let quad = bc_quadrature(
            |x| gauss(0.0, 1.0).density(x),
            |x| gauss(0.0, 2.0).density(x),
            -24.0,
            24.0,
        )
        .unwrap();
        assert!((-quad.ln() - wider.distance()).abs() < 1e-8);
    }

    #[test]
    fn quadrature_uniform_cases() {
        let unit = |x: f64| if (0.0..=1.0).contains(&x) { 1.0 } else { 0.0 };
        let shifted = |x: f64| if (2.0..=3.0).contains(&x) { 1.0 } else { 0.0 };
        assert!((bc_quadrature(unit, unit, 0.0, 1.0).unwrap() - 1.0).abs() < 1e-10);
        assert!(bc_quadrature(unit, shifted, 0.0, 3.0).unwrap().abs() < 1e-10);
    }

    #[test]
    fn quadrature_reports_failure() {
        // not integrable near zero; the error never drops below tolerance
        let spike = |x: f64| 1.0 / (x * x);
        assert!(matches!(
            bc_quadrature(spike, spike, 0.0, 1.0),
            Err(DistanceError::Quadrature { .. })
        ));
    }

    #[test]
    fn mvn_worked_values() {
        let a = mvn1(0.0, 1.0);
        assert_eq!(bc_mvn(&a, &a).unwrap().distance(), 0.0);
        let b = mvn1(2.0, 1.0);
        assert!((bc_mvn(&a, &b).unwrap().distance() - 0.5).abs() < 1e-15);

        let i2 = DMatrix::identity(2, 2);
        let p = MvnSummary::new(DVector::from_vec(vec![0.0, 0.0]), i2.clone(), 2).unwrap();
        let q = MvnSummary::new(DVector::from_vec(vec![1.0, 0.0]), i2, 2).unwrap();
        assert!((bc_mvn(&p, &q).unwrap().distance() - 0.125).abs() < 1e-15);
    }

    #[test]
    fn mvn_dimension_mismatch() {
        let p = MvnSummary::new(DVector::zeros(2), DMatrix::identity(2, 2), 2).unwrap();
        assert_eq!(
            bc_mvn(&p, &mvn1(0.0, 1.0)),
            Err(DistanceError::DimensionMismatch(2, 1))
        );
    }

    #[test]
    fn multi_population() {
        let p = cat(&[0.2, 0.3, 0.5]);
        assert!(
            (bc_multi(&[p.clone(), p.clone(), p.clone(), p.clone()]).unwrap() - 1.0).abs() < 1e-12
        );
        let q = cat(&[0.6, 0.1, 0.3]);
        let pair = bc_multi(&[p.clone(), q.clone()]).unwrap();
        assert!((pair - bc_discrete(&p, &q).unwrap().rho()).abs() < 1e-12);
        let three = bc_multi(&[cat(&[1.0, 0.0]), cat(&[0.5, 0.5]), cat(&[0.5, 0.5])]).unwrap();
        assert!((three - 0.25f64.powf(1.0 / 3.0)).abs() < 1e-12);
        assert!((three - 0.629961).abs() < 1e-6);
        assert!(bc_multi(std::slice::from_ref(&p)).is_err());
        assert!(bc_multi(&[p, cat(&[0.5, 0.5])]).is_err());
    }

    fn probs(raw: Vec<f64>) -> CategoricalDist {
        let total: f64 = raw.iter().sum();
        CategoricalDist::new(raw.into_iter().map(|r| r / total).collect()).unwrap()
    }

    proptest! {
        #[test]
        fn multi_is_permutation_invariant(
            a in proptest::collection::vec(0.01f64..1.0, 4),
            b in proptest::collection::vec(0.01f64..1.0, 4),
            c in proptest::collection::vec(0.01f64..1.0, 4),
        ) {
            let (a, b, c) = (probs(a), probs(b), probs(c));
            let x = bc_multi(&[a.clone(), b.clone(), c.clone()]).unwrap();
            let y = bc_multi(&[c, a, b]).unwrap();
            prop_assert!((x - y).abs() < 1e-14);
            prop_assert!((0.0..=1.0).contains(&x));
        }

        #[test]
        fn gaussian_matches_one_dim_mvn(
            m1 in -5.0f64..5.0, m2 in -5.0f64..5.0, s1 in 0.1f64..4.0, s2 in 0.1f64..4.0
        ) {
            let g = bc_gaussian(&gauss(m1, s1), &gauss(m2, s2)).unwrap();
            let m = bc_mvn(&mvn1(m1, s1 * s1), &mvn1(m2, s2 * s2)).unwrap();
            prop_assert!((g.distance() - m.distance()).abs() < 1e-12);
        }
    }
}
