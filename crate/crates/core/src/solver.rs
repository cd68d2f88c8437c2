//! Nystrom solution of the renewal equations of the chart.
//!
//! On the continuation region `[0, A)` the statistic is a sub-stochastic
//! Markov chain. With `K_inf` and `K_0` the pre- and post-change transition
//! kernels restricted to `[0, A)`:
//!
//! * ARL to false alarm: `l(x) = 1 + int K_inf(x, y) l(y) dy`
//! * delay with the change at the start: `d(x) = 1 + int K_0(x, y) d(y) dy`
//! * integral delay: `I(x) = d(x) + int K_inf(x, y) I(y) dy`
//!
//! Each is discretized on the composite Gauss layout and solved densely.
//! Off-node values use the Nystrom interpolant, i.e. the right-hand side of
//! the equation evaluated with the node solution.

use std::sync::{Arc, OnceLock};

use rayon::prelude::*;

use crate::error::{GsrError, Result};
use crate::linalg::LuFactors;
use crate::metrics::DelayProfile;
use crate::model::{self, ModelParams, Regime};
use crate::quadrature::Discretization;

/// Nystrom matrix: `entry(i, j) = kernel_density(node_i, node_j) * weight_j`.
#[derive(Debug, Clone)]
pub struct KernelMatrix {
    regime: Regime,
    n: usize,
    entries: Vec<f64>,
}

impl KernelMatrix {
    pub fn build(disc: &Discretization, params: &ModelParams, regime: Regime) -> Self {
        let n = disc.len();
        let mu = params.mu();
        let offset = regime.offset_sign() * 0.5 * mu;
        let col_scale: Vec<f64> = disc
            .nodes()
            .iter()
            .zip(disc.weights())
            .map(|(y, w)| w / (mu * y))
            .collect();
        let mut entries = vec![0.0; n * n];
        entries
            .par_chunks_exact_mut(n)
            .zip(disc.log1p_nodes.par_iter())
            .for_each(|(row, &log_start)| {
                for ((e, &log_y), &scale) in row.iter_mut().zip(&disc.log_nodes).zip(&col_scale) {
                    let z = (log_y - log_start) / mu + offset;
                    *e = crate::normal::pdf(z) * scale;
                }
            });
        Self { regime, n, entries }
    }

    pub fn regime(&self) -> Regime {
        self.regime
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.n..(i + 1) * self.n]
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.entries
            .chunks_exact(self.n)
            .map(|r| r.iter().sum())
            .collect()
    }

    /// `K v`, the action on functions of the state.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        self.entries
            .par_chunks_exact(self.n)
            .map(|r| r.iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `q^T K`, the action on (weighted) distributions.
    pub fn push_forward(&self, q: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (row, &qi) in self.entries.chunks_exact(self.n).zip(q) {
            if qi == 0.0 {
                continue;
            }
            for (o, &k) in out.iter_mut().zip(row) {
                *o += qi * k;
            }
        }
        out
    }

    /// Dominant eigenvalue by power iteration.
    pub fn dominant_eigenvalue(&self, iterations: usize) -> f64 {
        let mut v = vec![1.0; self.n];
        let mut lambda = 0.0;
        for _ in 0..iterations {
            let w = self.apply(&v);
            let norm = w.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            if norm == 0.0 {
                return 0.0;
            }
            lambda = norm / v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            v = w.into_iter().map(|x| x / norm).collect();
        }
        lambda
    }

    fn identity_minus(&self) -> Vec<f64> {
        let n = self.n;
        let mut a: Vec<f64> = self.entries.iter().map(|v| -v).collect();
        for i in 0..n {
            a[i * n + i] += 1.0;
        }
        a
    }
}

/// Convenience constructor mirroring [`KernelMatrix::build`].
pub fn build_operator(disc: &Discretization, params: &ModelParams, regime: Regime) -> KernelMatrix {
    KernelMatrix::build(disc, params, regime)
}

#[derive(Debug, Clone)]
enum Forcing {
    Constant(f64),
    Function(Box<NodeFunction>),
}

/// Solution of one renewal equation, stored at the nodes and evaluable
/// anywhere in `[0, A)` through the Nystrom interpolant.
#[derive(Debug, Clone)]
pub struct NodeFunction {
    disc: Arc<Discretization>,
    params: ModelParams,
    regime: Regime,
    forcing: Forcing,
    values: Vec<f64>,
}

impl NodeFunction {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn discretization(&self) -> &Discretization {
        &self.disc
    }

    /// Value at state `x >= 0`. At a node this returns the stored value.
    pub fn evaluate(&self, x: f64) -> Result<f64> {
        if !(x >= 0.0) || !x.is_finite() {
            return Err(GsrError::Domain(format!(
                "state must be finite and >= 0, got {x}"
            )));
        }
        if let Some(i) = self.disc.node_index(x) {
            return Ok(self.values[i]);
        }
        Ok(self.interpolate(x))
    }

    fn interpolate(&self, x: f64) -> f64 {
        let base = match &self.forcing {
            Forcing::Constant(c) => *c,
            Forcing::Function(f) => f.evaluate(x).expect("state already validated"),
        };
        let transition = transition_row(&self.disc, &self.params, self.regime, x);
        base + transition
            .iter()
            .zip(&self.values)
            .map(|(k, v)| k * v)
            .sum::<f64>()
    }

    /// `max_i |f_i - forcing_i - (K f)_i|`.
    pub fn residual(&self, kernel: &KernelMatrix) -> f64 {
        let kf = kernel.apply(&self.values);
        self.values
            .iter()
            .zip(&kf)
            .enumerate()
            .map(|(i, (f, k))| {
                let g = match &self.forcing {
                    Forcing::Constant(c) => *c,
                    Forcing::Function(h) => h.values[i],
                };
                (f - g - k).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// `kernel_density(x, node_j) * weight_j` for all nodes.
pub(crate) fn transition_row(
    disc: &Discretization,
    params: &ModelParams,
    regime: Regime,
    x: f64,
) -> Vec<f64> {
    disc.nodes()
        .iter()
        .zip(disc.weights())
        .map(|(&y, &w)| model::density_unchecked(x, y, params, regime) * w)
        .collect()
}

/// Options for the `ADD_k` iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileOptions {
    /// Hard cap on the number of change-points examined.
    pub k_max: usize,
    /// Relative change below which one step counts as stalled.
    pub stall_tol: f64,
    /// Consecutive stalled steps that declare the steady state.
    pub stall_window: usize,
}

impl Default for ProfileOptions {
    fn default() -> Self {
        Self {
            k_max: 20_000,
            stall_tol: 1e-7,
            stall_window: 10,
        }
    }
}

/// Discretized chart for one `(mu, A)` pair with lazily built operators and
/// factorizations.
#[derive(Debug)]
pub struct GsrSolver {
    disc: Arc<Discretization>,
    params: ModelParams,
    pre: OnceLock<KernelMatrix>,
    post: OnceLock<KernelMatrix>,
    pre_lu: OnceLock<LuFactors>,
    post_lu: OnceLock<LuFactors>,
}

impl GsrSolver {
    pub fn new(params: ModelParams, threshold: f64, resolution: usize) -> Result<Self> {
        Ok(Self::from_discretization(
            Discretization::new(threshold, resolution)?,
            params,
        ))
    }

    pub fn from_discretization(disc: Discretization, params: ModelParams) -> Self {
        Self {
            disc: Arc::new(disc),
            params,
            pre: OnceLock::new(),
            post: OnceLock::new(),
            pre_lu: OnceLock::new(),
            post_lu: OnceLock::new(),
        }
    }

    pub fn discretization(&self) -> &Discretization {
        &self.disc
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn threshold(&self) -> f64 {
        self.disc.threshold()
    }

    pub fn kernel(&self, regime: Regime) -> &KernelMatrix {
        let cell = match regime {
            Regime::PreChange => &self.pre,
            Regime::PostChange => &self.post,
        };
        cell.get_or_init(|| KernelMatrix::build(&self.disc, &self.params, regime))
    }

    fn factors(&self, regime: Regime) -> Result<&LuFactors> {
        let (cell, context) = match regime {
            Regime::PreChange => (&self.pre_lu, "pre-change renewal equation"),
            Regime::PostChange => (&self.post_lu, "post-change renewal equation"),
        };
        if let Some(lu) = cell.get() {
            return Ok(lu);
        }
        let kernel = self.kernel(regime);
        let lu = LuFactors::factor(kernel.identity_minus(), kernel.dim())
            .map_err(|e| e.context(context))?;
        lu.check_conditioning(context)?;
        Ok(cell.get_or_init(|| lu))
    }

    fn solve(&self, regime: Regime, forcing: Forcing) -> Result<NodeFunction> {
        let lu = self.factors(regime)?;
        let rhs = match &forcing {
            Forcing::Constant(c) => vec![*c; self.disc.len()],
            Forcing::Function(f) => f.values.clone(),
        };
        let values = lu.solve(&rhs);
        if values.iter().any(|v| !v.is_finite()) {
            return Err(GsrError::numerical(
                format!("{regime:?} renewal equation"),
                "non-finite solution",
            ));
        }
        Ok(NodeFunction {
            disc: Arc::clone(&self.disc),
            params: self.params,
            regime,
            forcing,
            values,
        })
    }

    /// ARL to false alarm as a function of the starting state.
    pub fn solve_arl(&self) -> Result<NodeFunction> {
        self.solve(Regime::PreChange, Forcing::Constant(1.0))
            .map_err(|e| e.context("ARL equation"))
    }

    /// Expected delay when the process is out of control from the start.
    pub fn solve_delay(&self) -> Result<NodeFunction> {
        self.solve(Regime::PostChange, Forcing::Constant(1.0))
            .map_err(|e| e.context("delay equation"))
    }

    /// Integral delay `sum_k E_k[max(0, T - k)]` given the delay function `d`.
    pub fn solve_iadd(&self, delay: &NodeFunction) -> Result<NodeFunction> {
        if delay.regime != Regime::PostChange || !Arc::ptr_eq(&delay.disc, &self.disc) {
            return Err(GsrError::Configuration(
                "integral delay needs the post-change delay on the same discretization".into(),
            ));
        }
        self.solve(
            Regime::PreChange,
            Forcing::Function(Box::new(delay.clone())),
        )
        .map_err(|e| e.context("integral delay equation"))
    }

    /// Sequence `ADD_k` for a chart started at `r`, with survival
    /// probabilities `P_inf(T > k)`.
    ///
    /// The start is a point mass at `r`; the first transition uses the exact
    /// density `K_inf(r, .)` so `r` never has to sit on the grid.
    pub fn add_sequence(
        &self,
        r: f64,
        delay: &NodeFunction,
        options: &ProfileOptions,
    ) -> Result<DelayProfile> {
        let a = self.threshold();
        if !(r >= 0.0 && r < a) {
            return Err(GsrError::Domain(format!(
                "headstart must lie in [0, {a}), got {r}"
            )));
        }
        if options.k_max == 0 || !(options.stall_tol > 0.0) || options.stall_window == 0 {
            return Err(GsrError::Configuration(format!(
                "invalid profile options {options:?}"
            )));
        }
        let kernel = self.kernel(Regime::PreChange);
        let d = delay.values();

        let mut add = vec![delay.evaluate(r)?];
        let mut survival = vec![1.0];
        let mut q = transition_row(&self.disc, &self.params, Regime::PreChange, r);
        let mut surv = 1.0;
        let mut stalled = 0usize;
        let mut converged = false;
        let mut decay_rate = 1.0;

        for k in 1..=options.k_max {
            let mass: f64 = q.iter().sum();
            if !(mass > f64::MIN_POSITIVE) {
                // every path has stopped; nothing left to condition on
                converged = true;
                decay_rate = 0.0;
                break;
            }
            decay_rate = mass;
            surv *= mass;
            q.iter_mut().for_each(|v| *v /= mass);
            let add_k: f64 = q.iter().zip(d).map(|(a, b)| a * b).sum();
            let prev = add[k - 1];
            add.push(add_k);
            survival.push(surv);

            if ((add_k - prev) / prev).abs() < options.stall_tol {
                stalled += 1;
                if stalled >= options.stall_window {
                    converged = true;
                    break;
                }
            } else {
                stalled = 0;
            }
            if k < options.k_max {
                q = kernel.push_forward(&q);
            }
        }

        let capped = !converged;
        let steady = steady_state_estimate(&add);
        let last_surv = *survival.last().unwrap();
        let survival_tail = if decay_rate < 1.0 {
            last_surv * decay_rate / (1.0 - decay_rate)
        } else {
            f64::INFINITY
        };
        DelayProfile::new(
            add,
            survival,
            steady,
            converged,
            capped,
            decay_rate,
            survival_tail,
        )
    }
}

/// Aitken extrapolation of the last three values when they contract
/// geometrically; otherwise the last value.
fn steady_state_estimate(add: &[f64]) -> f64 {
    let n = add.len();
    let last = add[n - 1];
    if n < 3 {
        return last;
    }
    let (a0, a1, a2) = (add[n - 3], add[n - 2], add[n - 1]);
    let (d1, d2) = (a1 - a0, a2 - a1);
    if d1 == 0.0 || d2 == 0.0 {
        return last;
    }
    let ratio = d2 / d1;
    if !(ratio > 0.0 && ratio < 0.999) {
        return last;
    }
    let correction = d2 * ratio / (1.0 - ratio);
    if correction.abs() > 1e-4 * last.abs() {
        return last;
    }
    last + correction
}
