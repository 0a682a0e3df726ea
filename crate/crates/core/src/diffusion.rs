//! Bass diffusion: closed-form adoption curves, a per-step binomial arrival
//! sampler and least-squares parameter recovery.
//!
//! Time is measured in abstract periods and every rate is per period. The
//! installed fraction solves `f / (1 - F) = p + q F` with `F(0) = 0`:
//!
//! ```text
//! F(t) = (1 - e^{-(p+q)t}) / (1 + (q/p) e^{-(p+q)t})
//! S(t) = m (p+q)^2 / p * e^{-(p+q)t} / (1 + (q/p) e^{-(p+q)t})^2
//! ```

use std::io::{Read, Write};

use nalgebra::{Matrix3, Vector3};
use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DiffusionError {
    #[error("invalid Bass parameters: {0}")]
    InvalidParams(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("fit did not converge after {iterations} iterations (rss {rss:e})")]
    NotConverged {
        best: BassParams,
        rss: f64,
        iterations: usize,
    },
    #[error("series csv: {0}")]
    Csv(String),
}

/// Innovation / imitation / market-potential triple.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BassParams {
    p: f64,
    q: f64,
    m: f64,
}

impl BassParams {
    pub fn new(p: f64, q: f64, m: f64) -> Result<Self, DiffusionError> {
        if !(p.is_finite() && p > 0.0) {
            return Err(DiffusionError::InvalidParams(format!(
                "coefficient of innovation p must be > 0, got {p}"
            )));
        }
        if !(q.is_finite() && q >= 0.0) {
            return Err(DiffusionError::InvalidParams(format!(
                "coefficient of imitation q must be >= 0, got {q}"
            )));
        }
        if !(m.is_finite() && m > 0.0) {
            return Err(DiffusionError::InvalidParams(format!(
                "market potential m must be > 0, got {m}"
            )));
        }
        Ok(Self { p, q, m })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    /// Time of peak sales, `ln(q/p) / (p+q)` when imitation dominates, else 0.
    pub fn peak_time(&self) -> f64 {
        if self.q > self.p {
            (self.q / self.p).ln() / (self.p + self.q)
        } else {
            0.0
        }
    }
}

fn check_time(t: f64) -> Result<(), DiffusionError> {
    if t.is_nan() || t < 0.0 {
        return Err(DiffusionError::Domain(format!(
            "time must be >= 0, got {t}"
        )));
    }
    Ok(())
}

/// Installed base fraction F(t).
pub fn installed_fraction(params: &BassParams, t: f64) -> Result<f64, DiffusionError> {
    check_time(t)?;
    let decay = (-(params.p + params.q) * t).exp();
    // -expm1 keeps precision for small t
    let num = -(-(params.p + params.q) * t).exp_m1();
    Ok((num / (1.0 + params.q / params.p * decay)).clamp(0.0, 1.0))
}

/// Not-yet-adopted fraction 1 - F(t), without the cancellation of
/// subtracting F from 1 late in the curve.
pub fn remaining_fraction(params: &BassParams, t: f64) -> Result<f64, DiffusionError> {
    check_time(t)?;
    let ratio = params.q / params.p;
    let decay = (-(params.p + params.q) * t).exp();
    Ok(((1.0 + ratio) * decay / (1.0 + ratio * decay)).clamp(0.0, 1.0))
}

/// Sales rate S(t) = m f(t).
pub fn sales_rate(params: &BassParams, t: f64) -> Result<f64, DiffusionError> {
    check_time(t)?;
    Ok(sales_rate_unchecked(params.p, params.q, params.m, t))
}

fn sales_rate_unchecked(p: f64, q: f64, m: f64, t: f64) -> f64 {
    let s = p + q;
    let decay = (-s * t).exp();
    let denom = 1.0 + q / p * decay;
    m * s * s / p * decay / (denom * denom)
}

/// Adoption hazard `p + q F` for an installed fraction F.
pub fn hazard(params: &BassParams, installed: f64) -> Result<f64, DiffusionError> {
    if !(0.0..=1.0).contains(&installed) {
        return Err(DiffusionError::Domain(format!(
            "installed fraction must lie in [0, 1], got {installed}"
        )));
    }
    Ok(params.p + params.q * installed)
}

/// Per-step arrival counts. Sampled series hold integer counts; synthetic
/// expected-value series may hold fractional counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdoptionSeries {
    pub dt: f64,
    pub counts: Vec<f64>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl AdoptionSeries {
    pub fn new(dt: f64, counts: Vec<f64>) -> Result<Self, DiffusionError> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(DiffusionError::Domain(format!("dt must be > 0, got {dt}")));
        }
        if let Some(bad) = counts.iter().find(|c| !(c.is_finite() && **c >= 0.0)) {
            return Err(DiffusionError::Domain(format!(
                "arrival counts must be finite and >= 0, got {bad}"
            )));
        }
        Ok(Self {
            dt,
            counts,
            warnings: Vec::new(),
        })
    }

    /// Expected arrivals per step, `m (F(t_{i+1}) - F(t_i))`.
    pub fn expected(params: &BassParams, dt: f64, horizon: f64) -> Result<Self, DiffusionError> {
        let steps = step_count(dt, horizon)?;
        let mut prev = 0.0;
        let counts = (1..=steps)
            .map(|i| {
                let f = installed_fraction(params, i as f64 * dt).expect("t >= 0");
                let c = params.m * (f - prev);
                prev = f;
                c.max(0.0)
            })
            .collect();
        Self::new(dt, counts)
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.counts.iter().sum()
    }

    /// Running total after each step.
    pub fn cumulative(&self) -> Vec<f64> {
        self.counts
            .iter()
            .scan(0.0, |acc, c| {
                *acc += c;
                Some(*acc)
            })
            .collect()
    }

    /// Writes `step_index,arrivals` with a header row.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), DiffusionError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["step_index", "arrivals"])
            .map_err(|e| DiffusionError::Csv(e.to_string()))?;
        for (i, c) in self.counts.iter().enumerate() {
            w.write_record([i.to_string(), c.to_string()])
                .map_err(|e| DiffusionError::Csv(e.to_string()))?;
        }
        w.flush().map_err(|e| DiffusionError::Csv(e.to_string()))
    }

    pub fn read_csv<R: Read>(input: R, dt: f64) -> Result<Self, DiffusionError> {
        let mut r = csv::Reader::from_reader(input);
        let headers = r
            .headers()
            .map_err(|e| DiffusionError::Csv(e.to_string()))?;
        if headers.iter().collect::<Vec<_>>() != ["step_index", "arrivals"] {
            return Err(DiffusionError::Csv(format!(
                "expected header `step_index,arrivals`, got `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut counts = Vec::new();
        for (row, rec) in r.records().enumerate() {
            let rec = rec.map_err(|e| DiffusionError::Csv(e.to_string()))?;
            let idx: usize = rec
                .get(0)
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| DiffusionError::Csv(format!("row {row}: bad step_index")))?;
            if idx != row {
                return Err(DiffusionError::Csv(format!(
                    "row {row}: step_index {idx} out of sequence"
                )));
            }
            let c: f64 = rec
                .get(1)
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| DiffusionError::Csv(format!("row {row}: bad arrivals")))?;
            counts.push(c);
        }
        Self::new(dt, counts)
    }
}

fn step_count(dt: f64, horizon: f64) -> Result<usize, DiffusionError> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(DiffusionError::Domain(format!("dt must be > 0, got {dt}")));
    }
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(DiffusionError::Domain(format!(
            "horizon must be > 0, got {horizon}"
        )));
    }
    Ok(((horizon / dt).round() as usize).max(1))
}

/// One step of binomial thinning over the remaining potential.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepDraw {
    pub arrivals: u64,
    pub probability: f64,
    pub clamped: bool,
}

/// Draws arrivals for one step of length `dt` given `adopted` prior arrivals.
/// The market potential must be a whole number.
pub fn step_arrivals<R: Rng + ?Sized>(
    params: &BassParams,
    adopted: u64,
    dt: f64,
    rng: &mut R,
) -> Result<StepDraw, DiffusionError> {
    let m = whole_potential(params)?;
    if adopted >= m {
        return Ok(StepDraw {
            arrivals: 0,
            probability: 0.0,
            clamped: false,
        });
    }
    let h = hazard(params, adopted as f64 / params.m)?;
    let raw = h * dt;
    let clamped = raw > 1.0;
    let probability = raw.min(1.0);
    let remaining = m - adopted;
    let arrivals = Binomial::new(remaining, probability)
        .map_err(|e| DiffusionError::Domain(e.to_string()))?
        .sample(rng);
    Ok(StepDraw {
        arrivals,
        probability,
        clamped,
    })
}

fn whole_potential(params: &BassParams) -> Result<u64, DiffusionError> {
    if params.m.fract() != 0.0 || params.m < 1.0 {
        return Err(DiffusionError::InvalidParams(format!(
            "sampling needs a whole market potential >= 1, got {}",
            params.m
        )));
    }
    Ok(params.m as u64)
}

/// Stochastic arrival series over `[0, horizon]` in steps of `dt`.
pub fn sample_arrivals<R: Rng + ?Sized>(
    params: &BassParams,
    dt: f64,
    horizon: f64,
    rng: &mut R,
) -> Result<AdoptionSeries, DiffusionError> {
    let steps = step_count(dt, horizon)?;
    whole_potential(params)?;
    let mut adopted = 0u64;
    let mut counts = Vec::with_capacity(steps);
    let mut warnings = Vec::new();
    for step in 0..steps {
        let draw = step_arrivals(params, adopted, dt, rng)?;
        if draw.clamped {
            warnings.push(format!("step {step}: hazard*dt exceeded 1 and was clamped"));
        }
        adopted += draw.arrivals;
        counts.push(draw.arrivals as f64);
    }
    let mut series = AdoptionSeries::new(dt, counts)?;
    series.warnings = warnings;
    Ok(series)
}

/// Result of a successful fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BassFit {
    pub params: BassParams,
    pub rss: f64,
    pub rmse: f64,
    pub iterations: usize,
}

const FIT_MAX_ITER: usize = 500;
const MIN_NONZERO_STEPS: usize = 6;

/// Least-squares fit of per-step rates `counts/dt` against `S` at step
/// midpoints. Damped Gauss-Newton in `(ln p, q, ln m)`; `q` is projected
/// onto `q >= 0`.
pub fn fit(
    series: &AdoptionSeries,
    initial_guess: Option<BassParams>,
) -> Result<BassFit, DiffusionError> {
    let dt = series.dt;
    let times: Vec<f64> = (0..series.len()).map(|i| (i as f64 + 0.5) * dt).collect();
    let rates: Vec<f64> = series.counts.iter().map(|c| c / dt).collect();
    let nonzero = series.counts.iter().filter(|c| **c > 0.0).count();

    let fallback = initial_guess.unwrap_or(BassParams {
        p: 0.01,
        q: 0.1,
        m: series.total().max(1.0),
    });
    if nonzero < MIN_NONZERO_STEPS {
        return Err(DiffusionError::NotConverged {
            best: fallback,
            rss: rss_of(&times, &rates, &fallback),
            iterations: 0,
        });
    }

    let start = match initial_guess {
        Some(g) => g,
        None => grid_start(&times, &rates).unwrap_or(fallback),
    };

    let mut theta = Vector3::new(start.p.ln(), start.q, start.m.ln());
    let mut rss = rss_theta(&times, &rates, &theta);
    let mut lambda = 1e-3;
    let scale: f64 = rates
        .iter()
        .map(|r| r * r)
        .sum::<f64>()
        .max(f64::MIN_POSITIVE);

    for iter in 1..=FIT_MAX_ITER {
        let (jtj, jtr) = normal_equations(&times, &rates, &theta);
        let mut improved = false;
        let mut tiny_step = false;
        for _ in 0..40 {
            let mut damped = jtj;
            for i in 0..3 {
                damped[(i, i)] += lambda * jtj[(i, i)].max(1e-12);
            }
            let Some(step) = damped.lu().solve(&jtr) else {
                lambda *= 10.0;
                continue;
            };
            let mut cand = theta + step;
            cand[1] = cand[1].max(0.0);
            let cand_rss = rss_theta(&times, &rates, &cand);
            if cand_rss.is_finite() && cand_rss <= rss {
                let rel = (rss - cand_rss) / scale;
                tiny_step = (cand - theta).norm() < 1e-12 || rel < 1e-16;
                theta = cand;
                rss = cand_rss;
                lambda = (lambda / 3.0).max(1e-12);
                improved = true;
                break;
            }
            lambda *= 4.0;
        }
        let gradient_small = jtr.norm() <= 1e-10 * scale.sqrt();
        if !improved || tiny_step || gradient_small || rss <= 1e-24 * scale {
            let params = params_of(&theta);
            if !improved && !gradient_small && rss > 1e-8 * scale {
                return Err(DiffusionError::NotConverged {
                    best: params,
                    rss,
                    iterations: iter,
                });
            }
            return Ok(BassFit {
                params,
                rss,
                rmse: (rss / rates.len() as f64).sqrt(),
                iterations: iter,
            });
        }
    }
    Err(DiffusionError::NotConverged {
        best: params_of(&theta),
        rss,
        iterations: FIT_MAX_ITER,
    })
}

fn params_of(theta: &Vector3<f64>) -> BassParams {
    BassParams {
        p: theta[0].exp(),
        q: theta[1].max(0.0),
        m: theta[2].exp(),
    }
}

fn rss_of(times: &[f64], rates: &[f64], params: &BassParams) -> f64 {
    times
        .iter()
        .zip(rates)
        .map(|(t, y)| {
            let r = y - sales_rate_unchecked(params.p, params.q, params.m, *t);
            r * r
        })
        .sum()
}

fn rss_theta(times: &[f64], rates: &[f64], theta: &Vector3<f64>) -> f64 {
    rss_of(times, rates, &params_of(theta))
}

/// Analytic Jacobian of the model in `(ln p, q, ln m)`.
fn normal_equations(
    times: &[f64],
    rates: &[f64],
    theta: &Vector3<f64>,
) -> (Matrix3<f64>, Vector3<f64>) {
    let p = theta[0].exp();
    let q = theta[1].max(0.0);
    let m = theta[2].exp();
    let mut jtj = Matrix3::zeros();
    let mut jtr = Vector3::zeros();
    for (t, y) in times.iter().zip(rates) {
        // S = m s^2/p * e / D^2 with s = p+q, e = exp(-s t), D = 1 + (q/p) e
        let s = p + q;
        let e = (-s * t).exp();
        let d = 1.0 + q / p * e;
        let model = m * s * s / p * e / (d * d);
        // d ln S / d p and d ln S / d q
        let dd_dp = -q / (p * p) * e - q / p * t * e;
        let dd_dq = e / p - q / p * t * e;
        let dln_dp = 2.0 / s - 1.0 / p - t - 2.0 * dd_dp / d;
        let dln_dq = 2.0 / s - t - 2.0 * dd_dq / d;
        let grad = Vector3::new(model * dln_dp * p, model * dln_dq, model);
        let r = y - model;
        jtj += grad * grad.transpose();
        jtr += grad * r;
    }
    (jtj, jtr)
}

/// Coarse (p, q) grid with the market potential solved in closed form,
/// since `S` is linear in `m`.
fn grid_start(times: &[f64], rates: &[f64]) -> Option<BassParams> {
    let mut best: Option<(f64, BassParams)> = None;
    for i in 0..48 {
        let p = 1e-4 * (5e3f64).powf(i as f64 / 47.0);
        for j in 0..48 {
            let q = 2.0 * j as f64 / 47.0;
            let (mut gy, mut gg) = (0.0, 0.0);
            for (t, y) in times.iter().zip(rates) {
                let g = sales_rate_unchecked(p, q, 1.0, *t);
                gy += g * y;
                gg += g * g;
            }
            if gg <= 0.0 || gy <= 0.0 {
                continue;
            }
            let cand = BassParams { p, q, m: gy / gg };
            let rss = rss_of(times, rates, &cand);
            if best.is_none_or(|(b, _)| rss < b) {
                best = Some((rss, cand));
            }
        }
    }
    best.map(|(_, p)| p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn params(p: f64, q: f64, m: f64) -> BassParams {
        BassParams::new(p, q, m).unwrap()
    }

    /// RK4 on dF/dt = (p + qF)(1 - F), independent of the closed form.
    fn rk4_fraction(p: f64, q: f64, t_end: f64, steps: usize) -> f64 {
        let f = |x: f64| (p + q * x) * (1.0 - x);
        let h = t_end / steps as f64;
        let mut x = 0.0;
        for _ in 0..steps {
            let k1 = f(x);
            let k2 = f(x + 0.5 * h * k1);
            let k3 = f(x + 0.5 * h * k2);
            let k4 = f(x + h * k3);
            x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        x
    }

    #[test]
    fn fraction_at_launch_and_limit() {
        let b = params(0.03, 0.38, 1.0);
        assert_eq!(installed_fraction(&b, 0.0).unwrap(), 0.0);
        assert!((installed_fraction(&b, 1000.0).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn fraction_matches_ode_integration() {
        let b = params(0.03, 0.38, 1.0);
        let oracle = rk4_fraction(0.03, 0.38, 6.193, 20_000);
        let got = installed_fraction(&b, 6.193).unwrap();
        assert!((got - oracle).abs() < 1e-8, "{got} vs {oracle}");
    }

    #[test]
    fn negative_time_is_rejected() {
        let b = params(0.03, 0.38, 1.0);
        assert!(matches!(
            installed_fraction(&b, -1.0),
            Err(DiffusionError::Domain(_))
        ));
        assert!(sales_rate(&b, -0.5).is_err());
    }

    #[test]
    fn sales_at_launch_is_m_times_p() {
        let b = params(0.03, 0.38, 1000.0);
        assert!((sales_rate(&b, 0.0).unwrap() - 30.0).abs() < 1e-12);
    }

    #[test]
    fn pure_innovation_is_exponential() {
        let b = params(0.05, 0.0, 100.0);
        let oracle = 100.0 * 0.05 * (-0.5f64).exp();
        assert!((sales_rate(&b, 10.0).unwrap() - oracle).abs() < 1e-12);
    }

    #[test]
    fn peak_matches_grid_search() {
        let b = params(0.03, 0.38, 1.0);
        let mut best = (0.0, f64::MIN);
        for i in 0..=300_000 {
            let t = i as f64 * 1e-4;
            let s = sales_rate(&b, t).unwrap();
            if s > best.1 {
                best = (t, s);
            }
        }
        assert!(
            (b.peak_time() - best.0).abs() <= 1e-4,
            "{} vs {}",
            b.peak_time(),
            best.0
        );
    }

    #[test]
    fn hazard_endpoints_and_range() {
        let b = params(0.03, 0.38, 1.0);
        assert_eq!(hazard(&b, 0.0).unwrap(), 0.03);
        assert!((hazard(&b, 1.0).unwrap() - 0.41).abs() < 1e-15);
        assert!(hazard(&b, 1.2).is_err());
        assert!(hazard(&b, -0.1).is_err());
    }

    #[test]
    fn remaining_complements_installed() {
        let b = params(0.03, 0.38, 1000.0);
        for t in [0.0, 0.5, 3.0, 10.0] {
            let sum = installed_fraction(&b, t).unwrap() + remaining_fraction(&b, t).unwrap();
            assert!((sum - 1.0).abs() < 1e-15);
        }
        assert_eq!(remaining_fraction(&b, 0.0).unwrap(), 1.0);
    }

    #[test]
    fn hazard_identity_on_grid() {
        let b = params(0.03, 0.38, 1000.0);
        for i in 0..=300 {
            let t = i as f64 * 0.1;
            let f = installed_fraction(&b, t).unwrap();
            let lhs = sales_rate(&b, t).unwrap() / (b.m() * remaining_fraction(&b, t).unwrap());
            assert!((lhs - hazard(&b, f).unwrap()).abs() < 1e-10);
        }
    }

    #[test]
    fn derivative_matches_sales_rate() {
        let b = params(0.03, 0.38, 1000.0);
        let h = 1e-6;
        // beyond t ~ 20 the difference quotient of F ~ 1 is dominated by rounding
        for i in 0..=200 {
            let t = 0.1 + i as f64 * 0.1;
            let fd = (installed_fraction(&b, t + h).unwrap()
                - installed_fraction(&b, t - h).unwrap())
                / (2.0 * h);
            let s = sales_rate(&b, t).unwrap() / b.m();
            assert!((fd - s).abs() <= 1e-5 * s.abs().max(1e-12), "t={t}");
        }
    }

    #[test]
    fn invalid_params_rejected() {
        assert!(BassParams::new(0.0, 0.3, 1.0).is_err());
        assert!(BassParams::new(0.01, -0.1, 1.0).is_err());
        assert!(BassParams::new(0.01, 0.1, 0.0).is_err());
    }

    #[test]
    fn sampling_is_deterministic_and_bounded() {
        let b = params(0.03, 0.38, 10_000.0);
        let a = sample_arrivals(&b, 0.05, 30.0, &mut ChaCha8Rng::seed_from_u64(42)).unwrap();
        let c = sample_arrivals(&b, 0.05, 30.0, &mut ChaCha8Rng::seed_from_u64(42)).unwrap();
        assert_eq!(a, c);
        assert_eq!(a.len(), 600);
        assert!(a.total() <= 10_000.0);
    }

    #[test]
    fn sampling_clamps_large_hazard() {
        let b = params(0.9, 0.9, 50.0);
        let s = sample_arrivals(&b, 2.0, 10.0, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert!(!s.warnings.is_empty());
        assert_eq!(s.total(), 50.0);
    }

    #[test]
    fn sampling_needs_whole_potential() {
        let b = params(0.03, 0.38, 10.5);
        assert!(sample_arrivals(&b, 0.1, 1.0, &mut ChaCha8Rng::seed_from_u64(1)).is_err());
    }

    #[test]
    fn fit_recovers_noiseless_params() {
        let truth = params(0.03, 0.38, 1000.0);
        let series = AdoptionSeries::expected(&truth, 0.25, 40.0).unwrap();
        let fit = fit(&series, None).unwrap();
        let rel = |a: f64, b: f64| (a - b).abs() / b;
        assert!(rel(fit.params.p(), 0.03) < 0.01, "{:?}", fit);
        assert!(rel(fit.params.q(), 0.38) < 0.01, "{:?}", fit);
        assert!(rel(fit.params.m(), 1000.0) < 0.01, "{:?}", fit);
    }

    #[test]
    fn fit_pure_innovation_keeps_q_near_zero() {
        let truth = params(0.05, 0.0, 500.0);
        let series = AdoptionSeries::expected(&truth, 0.25, 80.0).unwrap();
        let fit = fit(&series, None).unwrap();
        assert!(fit.params.q().abs() < 0.005, "{:?}", fit);
    }

    #[test]
    fn fit_rejects_all_zero_series() {
        let series = AdoptionSeries::new(1.0, vec![0.0; 40]).unwrap();
        assert!(matches!(
            fit(&series, None),
            Err(DiffusionError::NotConverged { .. })
        ));
    }

    #[test]
    fn csv_round_trip() {
        let b = params(0.03, 0.38, 200.0);
        let s = sample_arrivals(&b, 0.5, 20.0, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        assert!(buf.starts_with(b"step_index,arrivals\n"));
        let back = AdoptionSeries::read_csv(buf.as_slice(), 0.5).unwrap();
        assert_eq!(back.counts, s.counts);
    }
}
