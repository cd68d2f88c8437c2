//! Simulation against the integral equations on small budgets.

use gsr_core::metrics::{evaluate, NumericsConfig};
use gsr_core::montecarlo::{
    estimate_add_k, estimate_arl, run_length_with, ChangePoint, RunOutcome, SimulationPlan,
};
use gsr_core::ChartDesign;

fn numerics() -> NumericsConfig {
    NumericsConfig {
        resolution: 256,
        ..NumericsConfig::default()
    }
}

#[test]
fn arl_and_delays_agree() {
    for (i, (mu, r, a)) in [(1.0, 3.05, 57.31), (0.5, 10.32, 82.14), (0.7, 0.0, 40.0)]
        .into_iter()
        .enumerate()
    {
        let design = ChartDesign::new(mu, r, a).unwrap();
        let rep = evaluate(&design, &numerics()).unwrap();
        let seed = 500 + i as u64;
        let arl =
            estimate_arl(&SimulationPlan::new(design, ChangePoint::Never, 20_000, seed).unwrap())
                .unwrap();
        assert!(
            arl.z_score(rep.arl).abs() < 3.5,
            "ARL {arl:?} vs {}",
            rep.arl
        );
        for k in [0u64, 2, 10] {
            let est = estimate_add_k(
                &SimulationPlan::new(design, ChangePoint::At(k), 20_000, seed).unwrap(),
            )
            .unwrap();
            let want = rep.profile.add[k as usize];
            assert!(
                est.delay.z_score(want).abs() < 3.5,
                "ADD_{k} {est:?} vs {want}"
            );
            let surv = rep.profile.survival[k as usize];
            if k > 0 {
                assert!(
                    est.survival.binomial_z(surv).abs() < 3.5,
                    "survival_{k} {:?} vs {surv}",
                    est.survival
                );
            }
        }
    }
}

#[test]
fn change_at_zero_keeps_every_run() {
    let design = ChartDesign::new(0.5, 10.32, 82.14).unwrap();
    let plan = SimulationPlan::new(design, ChangePoint::At(0), 3000, 1).unwrap();
    let est = estimate_add_k(&plan).unwrap();
    assert_eq!(est.discarded, 0);
    assert_eq!(est.censored, 0);
    assert_eq!(est.delay.effective_replications, 3000);
}

#[test]
fn thread_count_does_not_change_results() {
    let design = ChartDesign::new(0.5, 10.32, 82.14).unwrap();
    let plan = SimulationPlan::new(design, ChangePoint::At(5), 4000, 77).unwrap();
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| {
                (
                    estimate_add_k(&plan).unwrap(),
                    estimate_arl(&SimulationPlan {
                        change_point: ChangePoint::Never,
                        ..plan
                    })
                    .unwrap(),
                )
            })
    };
    let (a1, b1) = run(1);
    let (a3, b3) = run(3);
    assert_eq!(a1, a3);
    assert_eq!(b1.estimate.to_bits(), b3.estimate.to_bits());
    assert_eq!(b1.std_error.to_bits(), b3.std_error.to_bits());
}

#[test]
fn seed_changes_the_sample() {
    let design = ChartDesign::new(0.5, 0.0, 30.0).unwrap();
    let a =
        estimate_arl(&SimulationPlan::new(design, ChangePoint::Never, 500, 1).unwrap()).unwrap();
    let b =
        estimate_arl(&SimulationPlan::new(design, ChangePoint::Never, 500, 2).unwrap()).unwrap();
    assert_ne!(a.estimate, b.estimate);
}

#[test]
fn forced_observations_drive_the_stopping_time() {
    let design = ChartDesign::new(1.0, 0.0, 10.0).unwrap();
    // X = 0 shrinks the statistic towards a fixed point below the limit
    assert_eq!(
        run_length_with(&design, ChangePoint::Never, 1000, |_, _| 0.0),
        RunOutcome::Censored
    );
    // a large post-change jump at n = 4 triggers the alarm there
    let out = run_length_with(&design, ChangePoint::At(3), 1000, |_, post| {
        if post {
            5.0
        } else {
            0.0
        }
    });
    assert_eq!(out, RunOutcome::Alarm(4));
}
