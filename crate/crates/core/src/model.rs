//! Probabilistic primitives of the Gaussian Shiryaev-Roberts chart.
//!
//! Observations are `N(0, 1)` before the change and `N(mu, 1)` after it. The
//! chart statistic moves as `R_n = (1 + R_{n-1}) * exp(score(X_n))`, so given
//! `R_{n-1} = x` the log of `R_n / (1 + x)` is Gaussian with standard
//! deviation `|mu|` and mean `-mu^2/2` (pre-change) or `+mu^2/2` (post-change).

use serde::Serialize;

use crate::error::{GsrError, Result};
use crate::normal;

/// Default absolute tolerance for the overshoot series.
pub const DEFAULT_SERIES_TOL: f64 = 1e-12;

/// Mean shift under the out-of-control hypothesis, in units of the process
/// standard deviation. Only the magnitude matters; the sign is dropped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModelParams {
    mu: f64,
}

impl ModelParams {
    pub fn new(mu: f64) -> Result<Self> {
        if !mu.is_finite() {
            return Err(GsrError::Domain(format!("shift must be finite, got {mu}")));
        }
        if mu == 0.0 {
            return Err(GsrError::Domain(
                "shift must be nonzero: the chart has no alternative to detect".into(),
            ));
        }
        Ok(Self { mu: mu.abs() })
    }

    /// The (nonnegative) shift magnitude.
    #[inline]
    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// Limiting average exponential overshoot at the default series tolerance.
    pub fn xi(&self) -> f64 {
        xi(self, DEFAULT_SERIES_TOL)
            .expect("default tolerance is valid")
            .value
    }
}

/// Which measure drives a single observation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Regime {
    /// `X ~ N(0, 1)`.
    PreChange,
    /// `X ~ N(mu, 1)`.
    PostChange,
}

impl Regime {
    /// Sign of the `mu/2` offset in the standardized log-increment.
    #[inline]
    pub(crate) fn offset_sign(self) -> f64 {
        match self {
            Regime::PreChange => 1.0,
            Regime::PostChange => -1.0,
        }
    }
}

/// Log-likelihood ratio of one observation: `mu * (x - mu/2)`.
#[inline]
pub fn score(x: f64, params: &ModelParams) -> f64 {
    let mu = params.mu;
    mu * (x - 0.5 * mu)
}

fn check_states(x: f64, y: f64) -> Result<()> {
    if !(x >= 0.0) {
        return Err(GsrError::Domain(format!(
            "start state must be >= 0, got {x}"
        )));
    }
    if !(y > 0.0) {
        return Err(GsrError::Domain(format!(
            "target state must be > 0, got {y}"
        )));
    }
    Ok(())
}

#[inline]
fn standardized(x: f64, y: f64, params: &ModelParams, regime: Regime) -> f64 {
    let mu = params.mu;
    (y.ln() - x.ln_1p()) / mu + regime.offset_sign() * 0.5 * mu
}

/// `P(R_n <= y | R_{n-1} = x)` under the given regime.
pub fn kernel_cdf(x: f64, y: f64, params: &ModelParams, regime: Regime) -> Result<f64> {
    check_states(x, y)?;
    if y.is_infinite() {
        return Ok(1.0);
    }
    Ok(normal::cdf(standardized(x, y, params, regime)))
}

/// Transition density of the statistic in `y`, given the previous value `x`.
pub fn kernel_density(x: f64, y: f64, params: &ModelParams, regime: Regime) -> Result<f64> {
    check_states(x, y)?;
    if y.is_infinite() {
        return Ok(0.0);
    }
    Ok(density_unchecked(x, y, params, regime))
}

#[inline]
pub(crate) fn density_unchecked(x: f64, y: f64, params: &ModelParams, regime: Regime) -> f64 {
    let z = standardized(x, y, params, regime);
    normal::pdf(z) / (params.mu * y)
}

/// Value of the overshoot constant together with truncation bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct XiSeries {
    pub value: f64,
    /// Number of series terms summed explicitly.
    pub terms: usize,
    /// Analytic bound on the discarded tail, already included in `value`.
    pub tail: f64,
}

/// Limiting average exponential overshoot
/// `xi = (2/mu^2) exp(-2 sum_{m>=1} Phi(-(mu/2) sqrt(m)) / m)`.
///
/// Summation stops at the first term below `series_tol / 100`; the remainder
/// is bounded by `(1/(M+1)) * int_M^inf Phi(-c sqrt(s)) ds`, which has a closed
/// form, and that bound is added to the partial sum.
pub fn xi(params: &ModelParams, series_tol: f64) -> Result<XiSeries> {
    if !(series_tol > 0.0) {
        return Err(GsrError::Configuration(format!(
            "series tolerance must be positive, got {series_tol}"
        )));
    }
    let mu = params.mu;
    let c = 0.5 * mu;
    let cutoff = series_tol * 1e-2;

    let mut sum = 0.0;
    let mut m: usize = 0;
    loop {
        m += 1;
        let term = normal::cdf(-c * (m as f64).sqrt()) / m as f64;
        sum += term;
        if term < cutoff {
            break;
        }
    }

    let t0 = c * (m as f64).sqrt();
    let integral = ((1.0 - t0 * t0) * normal::cdf(-t0) + t0 * normal::pdf(t0)) / (c * c);
    let tail = integral.max(0.0) / (m as f64 + 1.0);
    let total = sum + tail;

    Ok(XiSeries {
        value: 2.0 / (mu * mu) * (-2.0 * total).exp(),
        terms: m,
        tail,
    })
}
