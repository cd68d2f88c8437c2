use gsr_core::metrics::{evaluate, NumericsConfig};
use gsr_core::{ChartDesign, GsrSolver, ModelParams, Regime};

fn at(resolution: usize, design: &ChartDesign) -> gsr_core::PerformanceReport {
    evaluate(
        design,
        &NumericsConfig {
            resolution,
            ..NumericsConfig::default()
        },
    )
    .unwrap()
}

#[test]
fn metrics_settle_under_refinement() {
    let design = ChartDesign::new(0.2, 37.42, 122.02).unwrap();
    let coarse = at(128, &design);
    let mid = at(384, &design);
    let fine = at(1152, &design);
    for (name, f) in [
        (
            "arl",
            (|r: &gsr_core::PerformanceReport| r.arl) as fn(&gsr_core::PerformanceReport) -> f64,
        ),
        ("add0", |r| r.add0),
        ("sadd", |r| r.sadd),
        ("iadd", |r| r.iadd),
        ("lower_bound", |r| r.lower_bound),
    ] {
        let d1 = (f(&coarse) - f(&fine)).abs() / f(&fine);
        let d2 = (f(&mid) - f(&fine)).abs() / f(&fine);
        assert!(d2 < 1e-5, "{name}: {d2:e}");
        assert!(d1 < 1e-3, "{name}: {d1:e}");
    }
}

#[test]
fn published_design_values() {
    let rep = at(768, &ChartDesign::new(0.2, 37.42, 122.02).unwrap());
    assert!((rep.arl - 100.0).abs() < 0.1, "{}", rep.arl);
    assert!((rep.sadd - 30.9).abs() < 0.01, "{}", rep.sadd);
    assert!(
        (rep.lower_bound - 30.62).abs() < 0.01,
        "{}",
        rep.lower_bound
    );
}

#[test]
fn residuals_are_small_at_default_resolution() {
    let solver = GsrSolver::new(ModelParams::new(0.5).unwrap(), 384.21, 768).unwrap();
    let arl = solver.solve_arl().unwrap();
    let delay = solver.solve_delay().unwrap();
    assert!(arl.residual(solver.kernel(Regime::PreChange)) < 1e-8 * arl.values()[0]);
    assert!(delay.residual(solver.kernel(Regime::PostChange)) < 1e-8 * delay.values()[0]);
}
