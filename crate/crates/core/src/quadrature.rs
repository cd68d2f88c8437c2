//! Composite Gauss-Legendre layout on `[0, A)`.
//!
//! Panel boundaries are `(1 + A)^(i/P) - 1`, i.e. uniform in `ln(1 + y)`.
//! The transition kernel has a width proportional to `1 + y`, so this keeps
//! roughly the same number of nodes per kernel width everywhere and grades
//! the panels geometrically toward 0.

use serde::Serialize;

use crate::error::{GsrError, Result};

/// Smallest accepted total node count.
pub const MIN_RESOLUTION: usize = 8;
/// Target Gauss order per panel; the panel count grows with the resolution.
pub const PANEL_ORDER: usize = 64;
/// Default total node count.
pub const DEFAULT_RESOLUTION: usize = 768;

/// Gauss-Legendre nodes and weights on `[-1, 1]`, nodes ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        // Tricomi initial guess for the i-th largest root.
        let k = i as f64 + 1.0;
        let mut x = (std::f64::consts::PI * (k - 0.25) / (nf + 0.5)).cos()
            * (1.0 - (nf - 1.0) / (8.0 * nf * nf * nf));
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[n - 1 - i] = x;
        nodes[i] = -x;
        weights[n - 1 - i] = w;
        weights[i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let (p, pm1) = if n == 0 { (1.0, 0.0) } else { (p1, p0) };
    let d = n as f64 * (x * p - pm1) / (x * x - 1.0);
    (p, d)
}

/// Quadrature nodes and weights covering the continuation region `[0, A)`.
#[derive(Debug, Clone, Serialize)]
pub struct Discretization {
    threshold: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    panel_bounds: Vec<f64>,
    panel_orders: Vec<usize>,
    // ln(1 + node) and ln(node), reused when filling kernel matrices.
    #[serde(skip)]
    pub(crate) log1p_nodes: Vec<f64>,
    #[serde(skip)]
    pub(crate) log_nodes: Vec<f64>,
}

impl Discretization {
    /// Build the layout for control limit `threshold` with `resolution` nodes.
    pub fn new(threshold: f64, resolution: usize) -> Result<Self> {
        if !(threshold > 0.0) || !threshold.is_finite() {
            return Err(GsrError::Domain(format!(
                "control limit must be positive and finite, got {threshold}"
            )));
        }
        if resolution < MIN_RESOLUTION {
            return Err(GsrError::Configuration(format!(
                "resolution must be at least {MIN_RESOLUTION}, got {resolution}"
            )));
        }
        let panels = (resolution / PANEL_ORDER).max(1);
        let base = resolution / panels;
        let extra = resolution % panels;
        let panel_orders: Vec<usize> = (0..panels).map(|i| base + usize::from(i < extra)).collect();

        let span = threshold.ln_1p();
        let mut panel_bounds: Vec<f64> = (0..=panels)
            .map(|i| (span * i as f64 / panels as f64).exp_m1())
            .collect();
        panel_bounds[0] = 0.0;
        panel_bounds[panels] = threshold;

        let mut nodes = Vec::with_capacity(resolution);
        let mut weights = Vec::with_capacity(resolution);
        let mut rule_cache: Option<(usize, Vec<f64>, Vec<f64>)> = None;
        for (p, &order) in panel_orders.iter().enumerate() {
            if rule_cache.as_ref().map(|c| c.0) != Some(order) {
                let (x, w) = gauss_legendre(order);
                rule_cache = Some((order, x, w));
            }
            let (_, x, w) = rule_cache.as_ref().unwrap();
            let (a, b) = (panel_bounds[p], panel_bounds[p + 1]);
            let half = 0.5 * (b - a);
            let mid = 0.5 * (b + a);
            for (xi, wi) in x.iter().zip(w) {
                nodes.push(mid + half * xi);
                weights.push(half * wi);
            }
        }

        let log1p_nodes = nodes.iter().map(|y: &f64| y.ln_1p()).collect();
        let log_nodes = nodes.iter().map(|y: &f64| y.ln()).collect();
        Ok(Self {
            threshold,
            nodes,
            weights,
            panel_bounds,
            panel_orders,
            log1p_nodes,
            log_nodes,
        })
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn panel_bounds(&self) -> &[f64] {
        &self.panel_bounds
    }

    pub fn panel_orders(&self) -> &[usize] {
        &self.panel_orders
    }

    /// Index of `x` if it is exactly one of the nodes.
    pub fn node_index(&self, x: f64) -> Option<usize> {
        self.nodes
            .binary_search_by(|n| n.partial_cmp(&x).unwrap_or(std::cmp::Ordering::Less))
            .ok()
    }

    /// Quadrature approximation of `int_0^A f(y) dy`.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&y, &w)| w * f(y))
            .sum()
    }
}

/// Convenience constructor mirroring [`Discretization::new`].
pub fn build_discretization(threshold: f64, resolution: usize) -> Result<Discretization> {
    Discretization::new(threshold, resolution)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_rules_integrate_polynomials() {
        for n in [1, 2, 5, 8, 17, 64, 96] {
            let (x, w) = gauss_legendre(n);
            assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-13, "n={n}");
            assert!(x.windows(2).all(|p| p[0] < p[1]));
            // degree 2n-1 exactness
            let deg = 2 * n - 2;
            let exact = 2.0 / (deg as f64 + 1.0);
            let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
            assert!((q - exact).abs() < 1e-12, "n={n} q={q}");
        }
    }

    #[test]
    fn single_panel_weights_sum() {
        let d = Discretization::new(1.0, 8).unwrap();
        assert_eq!(d.panel_orders(), &[8]);
        assert!((d.weights().iter().sum::<f64>() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn layout_invariants() {
        for &(a, n) in &[(57.31, 768), (1141.3, 1000), (0.3, 40), (82.14, 130)] {
            let d = Discretization::new(a, n).unwrap();
            assert_eq!(d.len(), n);
            assert!(d.nodes().windows(2).all(|p| p[0] < p[1]));
            assert!(d.nodes()[0] > 0.0 && *d.nodes().last().unwrap() < a);
            assert!(d.weights().iter().all(|&w| w > 0.0));
            let s: f64 = d.weights().iter().sum();
            assert!((s - a).abs() <= 1e-12 * a, "a={a} sum={s}");
            let widths: Vec<f64> = d.panel_bounds().windows(2).map(|p| p[1] - p[0]).collect();
            assert!(widths.windows(2).all(|w| w[1] > w[0]));
        }
    }

    #[test]
    fn quadratic_exactness() {
        let a = 57.31;
        let d = Discretization::new(a, 768).unwrap();
        let q = d.integrate(|y| y * y);
        let exact = a * a * a / 3.0;
        assert!(((q - exact) / exact).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(
            Discretization::new(10.0, 7),
            Err(GsrError::Configuration(_))
        ));
        assert!(matches!(
            Discretization::new(0.0, 64),
            Err(GsrError::Domain(_))
        ));
        assert!(Discretization::new(f64::INFINITY, 64).is_err());
    }

    #[test]
    fn node_lookup_is_exact() {
        let d = Discretization::new(10.0, 64).unwrap();
        assert_eq!(d.node_index(d.nodes()[17]), Some(17));
        assert_eq!(d.node_index(d.nodes()[17] + 1e-9), None);
    }
}
