//! Simulation oracle for the integral-equation results.
//!
//! Every replication draws from its own ChaCha8 stream, keyed by the plan
//! seed and indexed by the replication number, so results do not depend on
//! how replications are spread over threads. Normal variates come from the
//! inverse CDF. Sums are accumulated pairwise over the replication-ordered
//! outcomes.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{GsrError, Result};
use crate::metrics::{pairwise_sum, ChartDesign};
use crate::normal;

/// Minimum number of runs surviving to the change-point for an `ADD_k` estimate.
pub const MIN_ACCEPTED: u64 = 100;

/// Last in-control observation index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ChangePoint {
    Never,
    At(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimulationPlan {
    pub design: ChartDesign,
    pub change_point: ChangePoint,
    pub replications: u64,
    pub seed: u64,
    pub max_steps: u64,
}

impl SimulationPlan {
    /// Plan with the default step cap: `50 A / xi` without a change, and
    /// `k + 50 (2 ln(1 + A) / mu^2 + 1)` with the change after sample `k`.
    pub fn new(
        design: ChartDesign,
        change_point: ChangePoint,
        replications: u64,
        seed: u64,
    ) -> Result<Self> {
        let max_steps = default_max_steps(&design, change_point);
        Self::with_max_steps(design, change_point, replications, seed, max_steps)
    }

    pub fn with_max_steps(
        design: ChartDesign,
        change_point: ChangePoint,
        replications: u64,
        seed: u64,
        max_steps: u64,
    ) -> Result<Self> {
        if replications == 0 {
            return Err(GsrError::Configuration(
                "at least one replication is required".into(),
            ));
        }
        // Guard against censoring: the steps available after the change (or
        // from the start, with no change) must cover ten expected run lengths.
        let (offset, expected) = expected_run_length(&design, change_point);
        if (max_steps.saturating_sub(offset) as f64) < 10.0 * expected {
            return Err(GsrError::Configuration(format!(
                "step cap {max_steps} leaves less than ten times the expected run length {expected:.1}"
            )));
        }
        Ok(Self {
            design,
            change_point,
            replications,
            seed,
            max_steps,
        })
    }
}

/// Rough run length counted from the returned offset.
fn expected_run_length(design: &ChartDesign, change_point: ChangePoint) -> (u64, f64) {
    let xi = design.params.xi();
    let mu = design.mu();
    match change_point {
        ChangePoint::Never => (0, (design.limit / xi - design.r).max(1.0)),
        ChangePoint::At(k) => (k, 2.0 * design.limit.ln_1p() / (mu * mu) + 1.0),
    }
}

fn default_max_steps(design: &ChartDesign, change_point: ChangePoint) -> u64 {
    let xi = design.params.xi();
    let mu = design.mu();
    let cap = match change_point {
        ChangePoint::Never => 50.0 * design.limit / xi,
        ChangePoint::At(k) => k as f64 + 50.0 * (2.0 * design.limit.ln_1p() / (mu * mu) + 1.0),
    };
    cap.ceil().max(10.0) as u64
}

/// Outcome of one simulated run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunOutcome {
    Alarm(u64),
    /// No alarm within the step cap.
    Censored,
}

/// Run the chart on an explicit observation source. `observe(n, post_change)`
/// returns `X_n`; it is told whether sample `n` comes after the change.
pub fn run_length_with(
    design: &ChartDesign,
    change_point: ChangePoint,
    max_steps: u64,
    mut observe: impl FnMut(u64, bool) -> f64,
) -> RunOutcome {
    let mu = design.mu();
    let drift = 0.5 * mu * mu;
    let mut stat = design.r;
    for n in 1..=max_steps {
        let post = match change_point {
            ChangePoint::Never => false,
            ChangePoint::At(k) => n > k,
        };
        let x = observe(n, post);
        stat = (1.0 + stat) * (mu * x - drift).exp();
        if stat >= design.limit {
            return RunOutcome::Alarm(n);
        }
    }
    RunOutcome::Censored
}

fn stream(seed: u64, replication: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replication);
    rng
}

#[inline]
fn open_unit(rng: &mut ChaCha8Rng) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Simulate replication `replication` of `plan`.
pub fn simulate_run_length(plan: &SimulationPlan, replication: u64) -> RunOutcome {
    let mut rng = stream(plan.seed, replication);
    let mu = plan.design.mu();
    run_length_with(
        &plan.design,
        plan.change_point,
        plan.max_steps,
        |_, post| {
            let z = normal::quantile(open_unit(&mut rng));
            if post {
                z + mu
            } else {
                z
            }
        },
    )
}

fn simulate_all(plan: &SimulationPlan) -> Vec<RunOutcome> {
    (0..plan.replications)
        .into_par_iter()
        .map(|i| simulate_run_length(plan, i))
        .collect()
}

/// A sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EstimateWithError {
    pub estimate: f64,
    pub std_error: f64,
    /// Replications that entered the estimate.
    pub effective_replications: u64,
}

impl EstimateWithError {
    fn from_samples(samples: &[f64]) -> Self {
        let n = samples.len();
        let mean = pairwise_sum(samples) / n as f64;
        let centered: Vec<f64> = samples.iter().map(|x| (x - mean) * (x - mean)).collect();
        let var = if n > 1 {
            pairwise_sum(&centered) / (n - 1) as f64
        } else {
            0.0
        };
        Self {
            estimate: mean,
            std_error: (var / n as f64).sqrt(),
            effective_replications: n as u64,
        }
    }

    fn proportion(successes: u64, trials: u64) -> Self {
        let p = successes as f64 / trials as f64;
        Self {
            estimate: p,
            std_error: (p * (1.0 - p) / trials as f64).sqrt(),
            effective_replications: trials,
        }
    }

    /// z-score of a proportion against the model probability `p`, using the
    /// binomial standard error under `p`. Stays finite when the sample
    /// proportion is 0 or 1.
    pub fn binomial_z(&self, p: f64) -> f64 {
        let diff = self.estimate - p;
        if diff == 0.0 {
            return 0.0;
        }
        diff / (p * (1.0 - p) / self.effective_replications as f64).sqrt()
    }

    /// `(value - estimate) / std_error`; zero when both agree exactly.
    pub fn z_score(&self, value: f64) -> f64 {
        let diff = value - self.estimate;
        if diff == 0.0 {
            0.0
        } else {
            diff / self.std_error
        }
    }
}

/// ARL to false alarm from simulated in-control runs.
pub fn estimate_arl(plan: &SimulationPlan) -> Result<EstimateWithError> {
    if plan.change_point != ChangePoint::Never {
        return Err(GsrError::Configuration(
            "ARL to false alarm needs a plan without a change-point".into(),
        ));
    }
    let outcomes = simulate_all(plan);
    let mut samples = Vec::with_capacity(outcomes.len());
    for o in outcomes {
        match o {
            RunOutcome::Alarm(t) => samples.push(t as f64),
            RunOutcome::Censored => {
                return Err(GsrError::numerical(
                    "ARL simulation",
                    format!("a run exceeded the step cap of {}", plan.max_steps),
                ))
            }
        }
    }
    Ok(EstimateWithError::from_samples(&samples))
}

/// Conditional delay estimate with its bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DelayEstimate {
    pub change_point: u64,
    /// `E_k[T - k | T > k]` over runs without a false alarm up to `k`.
    pub delay: EstimateWithError,
    /// Fraction of runs with `T > k`, estimating `P_inf(T > k)`.
    pub survival: EstimateWithError,
    /// Runs discarded because they stopped at or before `k`.
    pub discarded: u64,
    /// Accepted runs that hit the step cap; they are left out of the mean.
    pub censored: u64,
}

/// `ADD_k` from simulated runs with the change after sample `k`.
pub fn estimate_add_k(plan: &SimulationPlan) -> Result<DelayEstimate> {
    let k = match plan.change_point {
        ChangePoint::At(k) => k,
        ChangePoint::Never => {
            return Err(GsrError::Configuration(
                "a delay estimate needs a finite change-point".into(),
            ))
        }
    };
    let outcomes = simulate_all(plan);
    let mut delays = Vec::with_capacity(outcomes.len());
    let mut discarded = 0u64;
    let mut censored = 0u64;
    for o in outcomes {
        match o {
            RunOutcome::Alarm(t) if t <= k => discarded += 1,
            RunOutcome::Alarm(t) => delays.push((t - k) as f64),
            RunOutcome::Censored => censored += 1,
        }
    }
    let accepted = plan.replications - discarded;
    if (delays.len() as u64) < MIN_ACCEPTED {
        return Err(GsrError::InsufficientSamples(format!(
            "only {} of {} runs survived to the change-point {k}; raise the replication count",
            delays.len(),
            plan.replications
        )));
    }
    Ok(DelayEstimate {
        change_point: k,
        delay: EstimateWithError::from_samples(&delays),
        survival: EstimateWithError::proportion(accepted, plan.replications),
        discarded,
        censored,
    })
}
