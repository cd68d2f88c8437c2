//! Constrained design: pick the headstart `r` and limit `A` that minimize
//! `SADD - STADD` subject to `ARL = gamma`.
//!
//! For a given `r` the limit is calibrated so the ARL hits `gamma`; the
//! resulting one-dimensional objective `g(r)` has a downward cusp at its
//! minimum, so the search is derivative-free: a geometric grid scan followed
//! by golden-section refinement.

use std::cell::{Cell, RefCell};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{GsrError, Result};
use crate::metrics::{evaluate_with, NumericsConfig, PerformanceReport, SaddArgmax};
use crate::model::ModelParams;
use crate::solver::GsrSolver;

/// Default relative tolerance on `|ARL - gamma| / gamma`.
pub const DEFAULT_REL_TOL: f64 = 1e-4;

/// Result of calibrating the control limit for one headstart.
#[derive(Debug)]
pub struct Calibration {
    pub limit: f64,
    pub arl: f64,
    /// Analytic starting point `xi (gamma + r)`.
    pub seed: f64,
    /// Number of ARL solves performed.
    pub evaluations: usize,
    /// Final sign-change bracket, or `None` if the seed already met the tolerance.
    pub bracket: Option<(f64, f64)>,
    /// Solver at the calibrated limit, ready for further equations.
    pub solver: GsrSolver,
}

/// Find `A` with `|ARL_A(r) - gamma| / gamma <= rel_tol`.
///
/// Starts from `A0 = xi (gamma + r)`, steps with the asymptotic slope
/// `dARL/dA = 1/xi` until the root is bracketed, then finishes with Brent's
/// method. The ARL is increasing in `A`, so the root is unique.
pub fn calibrate_threshold(
    params: &ModelParams,
    r: f64,
    gamma: f64,
    rel_tol: f64,
    resolution: usize,
) -> Result<Calibration> {
    if !(gamma > 1.0) || !gamma.is_finite() {
        return Err(GsrError::Domain(format!(
            "target ARL must exceed 1, got {gamma}"
        )));
    }
    if !(r >= 0.0) || !r.is_finite() {
        return Err(GsrError::Domain(format!("headstart must be >= 0, got {r}")));
    }
    if !(rel_tol > 0.0 && rel_tol <= 1e-2) {
        return Err(GsrError::Configuration(format!(
            "calibration tolerance must lie in (0, 1e-2], got {rel_tol}"
        )));
    }
    let xi = params.xi();
    let tol = rel_tol * gamma;
    let mut seed = xi * (gamma + r);
    if seed <= r {
        seed = 1.1 * r + 1.0;
    }

    let evaluations = Cell::new(0usize);
    // closest solve so far: (|excess|, limit, excess, solver)
    let best: RefCell<Option<(f64, f64, f64, GsrSolver)>> = RefCell::new(None);
    let eval = |limit: f64| -> Result<f64> {
        evaluations.set(evaluations.get() + 1);
        let solver = GsrSolver::new(*params, limit, resolution)?;
        let excess = solver.solve_arl()?.evaluate(r)? - gamma;
        let mut best = best.borrow_mut();
        if best.as_ref().is_none_or(|b| excess.abs() < b.0) {
            *best = Some((excess.abs(), limit, excess, solver));
        }
        Ok(excess)
    };

    let done = |bracket| {
        let evaluations = evaluations.get();
        let (_, limit, excess, solver) = best.take().expect("at least one evaluation");
        Calibration {
            limit,
            arl: excess + gamma,
            seed,
            evaluations,
            bracket,
            solver,
        }
    };

    let f_seed = eval(seed)?;
    if f_seed.abs() <= tol {
        return Ok(done(None));
    }

    // Step with the asymptotic slope, growing the step until the sign flips.
    let (mut x0, mut f0) = (seed, f_seed);
    let mut stretch = 1.0;
    let (x1, f1) = loop {
        let mut next = x0 - stretch * xi * f0;
        if next <= r {
            next = r + 0.5 * (x0 - r);
        }
        let f_next = eval(next)?;
        if f_next.abs() <= tol {
            return Ok(done(None));
        }
        if f_next.signum() != f0.signum() {
            break (next, f_next);
        }
        x0 = next;
        f0 = f_next;
        stretch *= 1.5;
        if evaluations.get() > 60 {
            return Err(GsrError::Configuration(format!(
                "could not bracket the control limit for r={r}, gamma={gamma}"
            )));
        }
    };

    // Brent's method on a sign-change bracket.
    let (mut a, mut fa, mut b, mut fb) = (x0, f0, x1, f1);
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    let mut bracket = (a.min(b), a.max(b));
    for _ in 0..100 {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        bracket = (b.min(c), b.max(c));
        if fb.abs() <= tol {
            return Ok(done(Some(bracket)));
        }
        let xtol = 4.0 * f64::EPSILON * b.abs();
        let m = 0.5 * (c - b);
        if m.abs() <= xtol {
            break;
        }
        if e.abs() >= xtol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                let qa = fa / fc;
                let rb = fb / fc;
                p = s * (2.0 * m * qa * (qa - rb) - (b - a) * (rb - 1.0));
                q = (qa - 1.0) * (rb - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (xtol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b += if d.abs() > xtol { d } else { xtol.copysign(m) };
        fb = eval(b)?;
    }
    Err(GsrError::numerical(
        "threshold calibration",
        format!(
            "no limit in [{:.6}, {:.6}] meets the ARL tolerance {rel_tol:e} for r={r}, gamma={gamma}",
            bracket.0, bracket.1
        ),
    ))
}

/// One evaluation of the objective along the constraint `ARL = gamma`.
#[derive(Debug, Clone, Serialize)]
pub struct Probe {
    pub r: f64,
    pub limit: f64,
    pub arl: f64,
    pub add0: f64,
    pub sadd: f64,
    pub sadd_argmax: SaddArgmax,
    pub lower_bound: f64,
    pub gap: f64,
    pub resolution: usize,
}

impl Probe {
    fn from_report(report: &PerformanceReport) -> Self {
        Self {
            r: report.r,
            limit: report.limit,
            arl: report.arl,
            add0: report.add0,
            sadd: report.sadd,
            sadd_argmax: report.sadd_argmax,
            lower_bound: report.lower_bound,
            gap: report.gap(),
            resolution: report.resolution,
        }
    }
}

/// Calibrate the limit for `r` and evaluate the design there.
pub fn probe_with_report(
    params: &ModelParams,
    gamma: f64,
    r: f64,
    rel_tol: f64,
    numerics: &NumericsConfig,
) -> Result<PerformanceReport> {
    let cal = calibrate_threshold(params, r, gamma, rel_tol, numerics.resolution)?;
    evaluate_with(&cal.solver, r, numerics)
}

/// [`probe_with_report`] reduced to the scalar summary.
pub fn probe(
    params: &ModelParams,
    gamma: f64,
    r: f64,
    rel_tol: f64,
    numerics: &NumericsConfig,
) -> Result<Probe> {
    probe_with_report(params, gamma, r, rel_tol, numerics).map(|rep| Probe::from_report(&rep))
}

/// Evaluate the constraint curve on a set of headstarts, concurrently.
pub fn constraint_curve(
    params: &ModelParams,
    gamma: f64,
    rs: &[f64],
    rel_tol: f64,
    numerics: &NumericsConfig,
) -> Vec<Result<Probe>> {
    rs.par_iter()
        .map(|&r| probe(params, gamma, r, rel_tol, numerics))
        .collect()
}

/// Search settings for [`optimize_design`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchConfig {
    pub numerics: NumericsConfig,
    /// Tolerance on the ARL constraint.
    pub rel_tol: f64,
    /// Size of the coarse scan, including `r = 0`.
    pub grid_points: usize,
    /// Upper end of the scan; `None` picks a default from `gamma` and `xi`.
    pub r_hi: Option<f64>,
    /// Golden-section stops once the bracket is this fraction of `r`.
    pub r_rel_tol: f64,
    /// Maximum number of resolution doublings for the final candidate.
    pub max_escalations: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            numerics: NumericsConfig::default(),
            rel_tol: DEFAULT_REL_TOL,
            grid_points: 33,
            r_hi: None,
            r_rel_tol: 1e-3,
            max_escalations: 2,
        }
    }
}

/// Default top of the headstart scan: `xi gamma / 2`, raised to
/// `min(gamma, xi gamma / (10 (1 - xi)))` for faint changes, where the
/// optimal headstart outgrows `xi gamma / 2`.
pub fn default_r_hi(gamma: f64, xi: f64) -> f64 {
    (0.5 * xi * gamma).max(gamma.min(0.1 * xi * gamma / (1.0 - xi)))
}

/// `r = 0` followed by `points - 1` geometrically spaced headstarts in
/// `[r_hi / 1000, r_hi]`.
pub fn headstart_grid(r_hi: f64, points: usize) -> Vec<f64> {
    let mut grid = vec![0.0];
    if points < 2 {
        return grid;
    }
    let lo = r_hi * 1e-3;
    let m = points - 1;
    for i in 0..m {
        let t = if m == 1 {
            1.0
        } else {
            i as f64 / (m - 1) as f64
        };
        grid.push(lo * (r_hi / lo).powf(t));
    }
    grid
}

/// Bookkeeping of one optimization.
#[derive(Debug, Clone, Serialize)]
pub struct DesignDiagnostics {
    pub probes: usize,
    pub golden_iterations: usize,
    pub resolution: usize,
    pub escalations: usize,
    pub r_hi: f64,
    /// The coarse scan had more than one local minimum.
    pub non_unimodal: bool,
    /// The best point sits at an end of the scanned range.
    pub at_boundary: bool,
    /// Coarse scan along the constraint curve (data for SADD/lower-bound plots).
    pub curve: Vec<Probe>,
}

/// Optimal design for one `(mu, gamma)` cell.
#[derive(Debug, Clone, Serialize)]
pub struct DesignResult {
    pub mu: f64,
    pub gamma: f64,
    pub r_star: f64,
    pub a_star: f64,
    pub sadd: f64,
    pub lower_bound: f64,
    pub gap: f64,
    pub arl_achieved: f64,
    pub diagnostics: DesignDiagnostics,
}

struct Search<'a> {
    params: ModelParams,
    gamma: f64,
    config: &'a SearchConfig,
    numerics: NumericsConfig,
    evaluated: Vec<Probe>,
}

impl Search<'_> {
    fn eval(&mut self, r: f64) -> Result<f64> {
        let p = probe(
            &self.params,
            self.gamma,
            r,
            self.config.rel_tol,
            &self.numerics,
        )?;
        let g = p.gap;
        self.evaluated.push(p);
        Ok(g)
    }

    /// Golden-section minimization of the gap on `[a, b]`.
    fn golden(&mut self, mut a: f64, mut b: f64) -> Result<usize> {
        const INV_PHI: f64 = 0.618_033_988_749_894_9;
        let mut iterations = 0;
        let mut c = b - INV_PHI * (b - a);
        let mut d = a + INV_PHI * (b - a);
        let mut fc = self.eval(c)?;
        let mut fd = self.eval(d)?;
        while b - a > self.config.r_rel_tol * (0.5 * (a + b)).max(1e-6) && iterations < 200 {
            iterations += 1;
            // ties keep the left part, favouring smaller headstarts
            if fc <= fd {
                b = d;
                d = c;
                fd = fc;
                c = b - INV_PHI * (b - a);
                fc = self.eval(c)?;
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + INV_PHI * (b - a);
                fd = self.eval(d)?;
            }
        }
        Ok(iterations)
    }

    fn best_since(&self, from: usize) -> Probe {
        self.evaluated[from..]
            .iter()
            .fold(None::<&Probe>, |best, p| match best {
                Some(b) if b.gap < p.gap || (b.gap == p.gap && b.r <= p.r) => Some(b),
                _ => Some(p),
            })
            .expect("at least one probe")
            .clone()
    }
}

fn local_minima(values: &[f64]) -> Vec<usize> {
    let n = values.len();
    (0..n)
        .filter(|&i| {
            let left = i == 0 || values[i] < values[i - 1];
            let right = i + 1 == n || values[i] <= values[i + 1];
            left && right
        })
        .collect()
}

/// Solve the constrained design problem for one `(mu, gamma)` cell.
pub fn optimize_design(mu: f64, gamma: f64, config: &SearchConfig) -> Result<DesignResult> {
    let params = ModelParams::new(mu)?;
    if !(gamma > 1.0) || !gamma.is_finite() {
        return Err(GsrError::Domain(format!(
            "target ARL must exceed 1, got {gamma}"
        )));
    }
    if config.grid_points < 3 {
        return Err(GsrError::Configuration(
            "the headstart scan needs at least 3 points".into(),
        ));
    }
    let xi = params.xi();
    let r_hi = config.r_hi.unwrap_or_else(|| default_r_hi(gamma, xi));
    if !(r_hi > 0.0) {
        return Err(GsrError::Configuration(format!(
            "scan upper end must be positive, got {r_hi}"
        )));
    }

    let grid = headstart_grid(r_hi, config.grid_points);
    let curve: Vec<Probe> =
        constraint_curve(&params, gamma, &grid, config.rel_tol, &config.numerics)
            .into_iter()
            .collect::<Result<_>>()
            .map_err(|e| e.context("headstart scan"))?;
    let gaps: Vec<f64> = curve.iter().map(|p| p.gap).collect();

    let mut search = Search {
        params,
        gamma,
        config,
        numerics: config.numerics,
        evaluated: curve.clone(),
    };

    let minima = local_minima(&gaps);
    let non_unimodal = minima.len() > 1;
    let (lo, hi) = if non_unimodal {
        // dense rescan across every candidate basin
        let first = minima[0].saturating_sub(1);
        let last = (minima[minima.len() - 1] + 1).min(grid.len() - 1);
        let (a, b) = (grid[first], grid[last]);
        let dense: Vec<f64> = (0..=64).map(|i| a + (b - a) * i as f64 / 64.0).collect();
        let probes: Vec<Probe> =
            constraint_curve(&params, gamma, &dense, config.rel_tol, &config.numerics)
                .into_iter()
                .collect::<Result<_>>()
                .map_err(|e| e.context("dense headstart scan"))?;
        let j = argmin_gap(&probes);
        search.evaluated.extend(probes);
        (
            dense[j.saturating_sub(1)],
            dense[(j + 1).min(dense.len() - 1)],
        )
    } else {
        let i = argmin_gap(&curve);
        (grid[i.saturating_sub(1)], grid[(i + 1).min(grid.len() - 1)])
    };
    let golden_iterations = search.golden(lo, hi)?;
    let mut best = search.best_since(0);
    let at_boundary = best.r <= grid[0] || best.r >= r_hi;

    // Check the candidate at doubled resolution; refine again if it moves.
    let mut escalations = 0;
    let mut resolution = config.numerics.resolution;
    while escalations < config.max_escalations {
        escalations += 1;
        resolution *= 2;
        search.numerics.resolution = resolution;
        let step = config.r_rel_tol * best.r.max(1e-3);
        let start = search.evaluated.len();
        let candidates = [best.r - step, best.r, best.r + step];
        for &r in candidates.iter().filter(|&&r| r >= 0.0) {
            search.eval(r)?;
        }
        let refined = search.best_since(start);
        let moved = (refined.r - best.r).abs() > 0.5 * step;
        if moved {
            let golden_start = search.evaluated.len();
            let (a, b) = ((best.r - 8.0 * step).max(0.0), best.r + 8.0 * step);
            search.golden(a, b)?;
            let from = start.min(golden_start);
            best = search.best_since(from);
        } else {
            best = refined;
            break;
        }
    }

    Ok(DesignResult {
        mu: params.mu(),
        gamma,
        r_star: best.r,
        a_star: best.limit,
        sadd: best.sadd,
        lower_bound: best.lower_bound,
        gap: best.gap,
        arl_achieved: best.arl,
        diagnostics: DesignDiagnostics {
            probes: search.evaluated.len(),
            golden_iterations,
            resolution: best.resolution,
            escalations,
            r_hi,
            non_unimodal,
            at_boundary,
            curve,
        },
    })
}

fn argmin_gap(probes: &[Probe]) -> usize {
    let mut best = 0;
    for (i, p) in probes.iter().enumerate() {
        if p.gap < probes[best].gap {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_shape() {
        let g = headstart_grid(100.0, 33);
        assert_eq!(g.len(), 33);
        assert_eq!(g[0], 0.0);
        assert!((g[1] - 0.1).abs() < 1e-12);
        assert!((g[32] - 100.0).abs() < 1e-9);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn local_minima_detection() {
        assert_eq!(local_minima(&[3.0, 2.0, 1.0, 2.0, 3.0]), vec![2]);
        assert_eq!(local_minima(&[3.0, 1.0, 2.0, 0.5, 3.0]), vec![1, 3]);
        assert_eq!(local_minima(&[1.0, 2.0, 3.0]), vec![0]);
    }

    #[test]
    fn calibration_argument_checks() {
        let p = ModelParams::new(1.0).unwrap();
        assert!(calibrate_threshold(&p, 1.0, 1.0, 1e-4, 64).is_err());
        assert!(calibrate_threshold(&p, -1.0, 100.0, 1e-4, 64).is_err());
        assert!(calibrate_threshold(&p, 1.0, 100.0, 0.1, 64).is_err());
    }

    #[test]
    fn calibration_hits_target() {
        let p = ModelParams::new(1.0).unwrap();
        let cal = calibrate_threshold(&p, 3.05, 100.0, 1e-6, 256).unwrap();
        assert!((cal.arl - 100.0).abs() <= 1e-4);
        assert!(((cal.limit - 57.31) / 57.31).abs() < 5e-3, "{}", cal.limit);
        assert!(cal.evaluations < 12, "{}", cal.evaluations);
    }
}
