//! Performance indices of a concrete chart design.

use serde::ser::{SerializeStruct, Serializer};
use serde::Serialize;

use crate::error::{GsrError, Result};
use crate::model::ModelParams;
use crate::quadrature::DEFAULT_RESOLUTION;
use crate::solver::{GsrSolver, ProfileOptions};

/// Absolute slack used when comparing the lower bound with SADD, and when
/// breaking ties between the finite-k maximum and the limit.
pub const TIE_SLACK: f64 = 1e-9;

/// A chart: headstart `r`, control limit `A` and the shift it is tuned to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChartDesign {
    pub params: ModelParams,
    pub r: f64,
    pub limit: f64,
}

impl ChartDesign {
    pub fn new(mu: f64, r: f64, limit: f64) -> Result<Self> {
        let params = ModelParams::new(mu)?;
        if !(limit > 0.0) || !limit.is_finite() {
            return Err(GsrError::Domain(format!(
                "control limit must be positive and finite, got {limit}"
            )));
        }
        if !(r >= 0.0 && r < limit) {
            return Err(GsrError::Domain(format!(
                "headstart must satisfy 0 <= r < A, got r={r}, A={limit}"
            )));
        }
        Ok(Self { params, r, limit })
    }

    pub fn mu(&self) -> f64 {
        self.params.mu()
    }
}

/// Where the worst-case delay is attained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SaddArgmax {
    Finite(usize),
    /// The steady-state limit exceeds every computed `ADD_k`.
    Limit,
}

impl Serialize for SaddArgmax {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            SaddArgmax::Finite(k) => s.serialize_u64(*k as u64),
            SaddArgmax::Limit => s.serialize_str("limit"),
        }
    }
}

/// The sequence `ADD_k` with survival probabilities and its supremum.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayProfile {
    pub add: Vec<f64>,
    /// `P_inf(T > k)`.
    pub survival: Vec<f64>,
    pub steady_state_add: f64,
    pub sadd: f64,
    pub sadd_argmax: SaddArgmax,
    pub converged: bool,
    /// The iteration stopped at its hard cap.
    pub capped: bool,
    /// Last one-step survival ratio, the geometric decay used for tails.
    pub decay_rate: f64,
    /// Extrapolated `sum_{k > K} P_inf(T > k)` beyond the last stored `K`.
    pub survival_tail: f64,
}

impl DelayProfile {
    pub fn new(
        add: Vec<f64>,
        survival: Vec<f64>,
        steady_state_add: f64,
        converged: bool,
        capped: bool,
        decay_rate: f64,
        survival_tail: f64,
    ) -> Result<Self> {
        if add.is_empty() || add.len() != survival.len() {
            return Err(GsrError::Configuration(
                "profile needs matching, nonempty delay and survival sequences".into(),
            ));
        }
        let mut profile = Self {
            add,
            survival,
            steady_state_add,
            sadd: f64::NAN,
            sadd_argmax: SaddArgmax::Finite(0),
            converged,
            capped,
            decay_rate,
            survival_tail,
        };
        let (sadd, argmax) = sadd_of(&profile)?;
        profile.sadd = sadd;
        profile.sadd_argmax = argmax;
        Ok(profile)
    }

    pub fn len(&self) -> usize {
        self.add.len()
    }

    pub fn is_empty(&self) -> bool {
        self.add.is_empty()
    }

    /// `sum_k P_inf(T > k)` including the extrapolated tail; equals the ARL.
    pub fn arl_from_survival(&self) -> f64 {
        pairwise_sum(&self.survival) + self.survival_tail
    }

    /// `sum_k P_inf(T > k) ADD_k` including the tail; equals the IADD.
    pub fn iadd_from_sequence(&self) -> f64 {
        let terms: Vec<f64> = self
            .survival
            .iter()
            .zip(&self.add)
            .map(|(s, a)| s * a)
            .collect();
        pairwise_sum(&terms) + self.steady_state_add * self.survival_tail
    }
}

impl Serialize for DelayProfile {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let k: Vec<usize> = (0..self.add.len()).collect();
        let mut st = s.serialize_struct("DelayProfile", 9)?;
        st.serialize_field("k", &k)?;
        st.serialize_field("add_k", &self.add)?;
        st.serialize_field("survival_k", &self.survival)?;
        st.serialize_field("steady_state_add", &self.steady_state_add)?;
        st.serialize_field("sadd", &self.sadd)?;
        st.serialize_field("sadd_argmax", &self.sadd_argmax)?;
        st.serialize_field("converged", &self.converged)?;
        st.serialize_field("capped", &self.capped)?;
        st.serialize_field("survival_tail", &self.survival_tail)?;
        st.end()
    }
}

/// Maximum of the delay profile over the computed `k` and the steady-state
/// limit, with its location. Ties within [`TIE_SLACK`] go to the finite `k`,
/// and among finite `k` to the smallest.
pub fn sadd_of(profile: &DelayProfile) -> Result<(f64, SaddArgmax)> {
    if !profile.converged && !profile.capped {
        return Err(GsrError::Configuration(
            "profile neither converged nor reached its cap; its supremum is unknown".into(),
        ));
    }
    let (k, best) = profile
        .add
        .iter()
        .enumerate()
        .fold(
            (0, f64::NEG_INFINITY),
            |b, (k, &v)| if v > b.1 { (k, v) } else { b },
        );
    if profile.steady_state_add > best + TIE_SLACK {
        Ok((profile.steady_state_add, SaddArgmax::Limit))
    } else {
        Ok((best, SaddArgmax::Finite(k)))
    }
}

/// Numerical settings for evaluating one design.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NumericsConfig {
    pub resolution: usize,
    pub stall_tol: f64,
    pub stall_window: usize,
    /// Cap on the profile length; `None` means `20 * ARL`.
    pub k_max: Option<usize>,
}

impl Default for NumericsConfig {
    fn default() -> Self {
        let p = ProfileOptions::default();
        Self {
            resolution: DEFAULT_RESOLUTION,
            stall_tol: p.stall_tol,
            stall_window: p.stall_window,
            k_max: None,
        }
    }
}

/// Everything the tables and figures report about one design.
#[derive(Debug, Clone, Serialize)]
pub struct PerformanceReport {
    pub mu: f64,
    pub r: f64,
    pub limit: f64,
    pub resolution: usize,
    pub arl: f64,
    pub add0: f64,
    pub sadd: f64,
    pub sadd_argmax: SaddArgmax,
    pub iadd: f64,
    pub riadd: f64,
    pub stadd: f64,
    /// Universal lower bound on the minimax delay at this ARL; equal to `stadd`.
    pub lower_bound: f64,
    pub profile: DelayProfile,
}

impl PerformanceReport {
    /// `SADD - lower bound`, nonnegative up to rounding.
    pub fn gap(&self) -> f64 {
        self.sadd - self.lower_bound
    }
}

/// `(r ADD_0 + IADD) / (ARL + r)`.
#[inline]
pub fn stationary_add(r: f64, add0: f64, iadd: f64, arl: f64) -> f64 {
    (r * add0 + iadd) / (arl + r)
}

/// Evaluate every index for `design`.
pub fn evaluate(design: &ChartDesign, config: &NumericsConfig) -> Result<PerformanceReport> {
    let solver = GsrSolver::new(design.params, design.limit, config.resolution)?;
    evaluate_with(&solver, design.r, config)
}

/// Evaluate using an existing solver (its limit and shift define the design).
pub fn evaluate_with(
    solver: &GsrSolver,
    r: f64,
    config: &NumericsConfig,
) -> Result<PerformanceReport> {
    let limit = solver.threshold();
    ChartDesign::new(solver.params().mu(), r, limit)?;

    let arl_fn = solver.solve_arl()?;
    let delay_fn = solver.solve_delay()?;
    let iadd_fn = solver.solve_iadd(&delay_fn)?;
    let arl = arl_fn.evaluate(r)?;
    let add0 = delay_fn.evaluate(r)?;
    let iadd = iadd_fn.evaluate(r)?;

    let k_max = config
        .k_max
        .unwrap_or_else(|| ((20.0 * arl).ceil() as usize).max(1000));
    let options = ProfileOptions {
        k_max,
        stall_tol: config.stall_tol,
        stall_window: config.stall_window,
    };
    let profile = solver
        .add_sequence(r, &delay_fn, &options)
        .map_err(|e| e.context("delay profile"))?;

    let riadd = iadd / arl;
    let stadd = stationary_add(r, add0, iadd, arl);
    Ok(PerformanceReport {
        mu: solver.params().mu(),
        r,
        limit,
        resolution: solver.discretization().len(),
        arl,
        add0,
        sadd: profile.sadd,
        sadd_argmax: profile.sadd_argmax,
        iadd,
        riadd,
        stadd,
        lower_bound: stadd,
        profile,
    })
}

/// Pairwise summation. The result depends only on the order of `values`.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        n if n <= 8 => values.iter().sum(),
        n => {
            let (a, b) = values.split_at(n / 2);
            pairwise_sum(a) + pairwise_sum(b)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic(add: Vec<f64>, steady: f64) -> DelayProfile {
        let survival = vec![1.0; add.len()];
        DelayProfile::new(add, survival, steady, true, false, 0.99, 10.0).unwrap()
    }

    #[test]
    fn decreasing_profile_peaks_at_zero() {
        let p = synthetic(vec![5.0, 4.0, 3.5, 3.2, 3.1], 3.05);
        assert_eq!(sadd_of(&p).unwrap(), (5.0, SaddArgmax::Finite(0)));
    }

    #[test]
    fn limit_wins_only_beyond_slack() {
        let p = synthetic(vec![1.0, 2.0, 2.5], 2.6);
        assert_eq!(p.sadd_argmax, SaddArgmax::Limit);
        assert_eq!(p.sadd, 2.6);
        let tie = synthetic(vec![1.0, 2.0, 2.5], 2.5 + 1e-10);
        assert_eq!(tie.sadd_argmax, SaddArgmax::Finite(2));
    }

    #[test]
    fn interior_bump() {
        let p = synthetic(vec![3.0, 4.0, 4.5, 4.2, 4.1], 4.1);
        assert_eq!((p.sadd, p.sadd_argmax), (4.5, SaddArgmax::Finite(2)));
        assert!(p.sadd >= p.steady_state_add && p.sadd >= p.add[0]);
    }

    #[test]
    fn unfinished_profile_is_refused() {
        let r = DelayProfile::new(vec![1.0, 2.0], vec![1.0, 0.9], 2.0, false, false, 0.9, 1.0);
        assert!(matches!(r, Err(GsrError::Configuration(_))));
        assert!(DelayProfile::new(vec![], vec![], 0.0, true, false, 0.9, 1.0).is_err());
    }

    #[test]
    fn design_validation() {
        assert!(ChartDesign::new(0.5, 10.0, 5.0).is_err());
        assert!(ChartDesign::new(0.5, 5.0, 5.0).is_err());
        assert!(ChartDesign::new(0.0, 1.0, 5.0).is_err());
        assert!(ChartDesign::new(-0.5, 0.0, 5.0).is_ok());
    }

    #[test]
    fn argmax_serializes_as_number_or_limit() {
        assert_eq!(serde_json::to_string(&SaddArgmax::Finite(7)).unwrap(), "7");
        assert_eq!(
            serde_json::to_string(&SaddArgmax::Limit).unwrap(),
            "\"limit\""
        );
    }

    #[test]
    fn pairwise_sum_matches_naive() {
        let v: Vec<f64> = (0..1000).map(|i| 1.0 / (i as f64 + 1.0)).collect();
        let naive: f64 = v.iter().sum();
        assert!((pairwise_sum(&v) - naive).abs() < 1e-12);
    }
}
