use std::ffi::CStr;
use std::ptr;

use gsr_ffi::*;

fn last_error() -> String {
    let p = gsr_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn xi_and_errors() {
    let mut v = 0.0;
    assert_eq!(unsafe { gsr_xi(0.2, &mut v) }, GsrStatus::Ok);
    assert!((v - 0.890037).abs() < 1e-5);
    assert!(gsr_last_error_message().is_null());

    assert_eq!(unsafe { gsr_xi(0.0, &mut v) }, GsrStatus::Domain);
    assert!(last_error().contains("shift"), "{}", last_error());

    assert_eq!(
        unsafe { gsr_xi(0.5, ptr::null_mut()) },
        GsrStatus::NullPointer
    );
    assert!(last_error().contains("out"));
}

#[test]
fn calibrate_matches_published_limit() {
    let (mut a, mut arl) = (0.0, 0.0);
    let st = unsafe { gsr_calibrate(1.0, 3.05, 100.0, 1e-4, 0, &mut a, &mut arl) };
    assert_eq!(st, GsrStatus::Ok);
    assert!((a - 57.31).abs() / 57.31 < 5e-3, "{a}");
    assert!((arl - 100.0).abs() <= 1e-2);

    let st = unsafe { gsr_calibrate(1.0, 0.0, 100.0, 0.5, 0, &mut a, &mut arl) };
    assert_eq!(st, GsrStatus::Configuration);
}

#[test]
fn report_handle_lifecycle() {
    let mut rep: *mut GsrReport = ptr::null_mut();
    let st = unsafe { gsr_report_evaluate(0.5, 10.32, 82.14, 256, &mut rep) };
    assert_eq!(st, GsrStatus::Ok);
    assert!(!rep.is_null());

    let mut s = GsrSummary::default();
    assert_eq!(unsafe { gsr_report_summary(rep, &mut s) }, GsrStatus::Ok);
    assert!((s.arl - 100.0).abs() < 0.1);
    assert!(s.lower_bound <= s.sadd + 1e-9);
    assert!((s.sadd - 12.68).abs() < 0.02);

    let n = unsafe { gsr_report_profile_len(rep) };
    assert!(n > 1);
    let mut add = vec![0.0; n + 5];
    let mut surv = vec![0.0; n + 5];
    let mut written = 0usize;
    let st = unsafe {
        gsr_report_profile(
            rep,
            add.as_mut_ptr(),
            surv.as_mut_ptr(),
            add.len(),
            &mut written,
        )
    };
    assert_eq!(st, GsrStatus::Ok);
    assert_eq!(written, n);
    assert_eq!(add[0], s.add0);
    assert_eq!(surv[0], 1.0);

    let st = unsafe { gsr_report_profile(rep, ptr::null_mut(), ptr::null_mut(), 3, &mut written) };
    assert_eq!((st, written), (GsrStatus::Ok, 3));

    unsafe { gsr_report_free(rep) };
    unsafe { gsr_report_free(ptr::null_mut()) };
    assert_eq!(unsafe { gsr_report_profile_len(ptr::null()) }, 0);
}

#[test]
fn report_rejects_headstart_above_limit() {
    let mut rep: *mut GsrReport = ptr::dangling_mut::<GsrReport>();
    let st = unsafe { gsr_report_evaluate(0.5, 90.0, 82.14, 0, &mut rep) };
    assert_eq!(st, GsrStatus::Domain);
    assert!(rep.is_null());
}

#[test]
fn optimize_cell() {
    let mut d = GsrDesign::default();
    let st = unsafe { gsr_optimize(1.0, 100.0, 0, &mut d) };
    assert_eq!(st, GsrStatus::Ok);
    assert!((d.r_star - 3.05).abs() / 3.05 < 0.01, "{d:?}");
    assert!((d.a_star - 57.31).abs() / 57.31 < 0.01, "{d:?}");
    assert!(d.gap >= -1e-9);
}

#[test]
fn simulate_estimates() {
    let mut e = GsrEstimate::default();
    let st = unsafe { gsr_simulate(1.0, 3.05, 57.31, -1, 2000, 11, &mut e) };
    assert_eq!(st, GsrStatus::Ok);
    assert_eq!(e.effective_replications, 2000);
    assert!((e.estimate - 100.0).abs() < 5.0 * e.std_error, "{e:?}");

    let st = unsafe { gsr_simulate(1.0, 3.05, 57.31, 0, 2000, 11, &mut e) };
    assert_eq!(st, GsrStatus::Ok);
    assert_eq!(e.effective_replications, 2000);

    let st = unsafe { gsr_simulate(1.0, 0.0, 1.0, 50, 150, 11, &mut e) };
    assert_eq!(st, GsrStatus::InsufficientSamples);
}

#[test]
fn header_is_generated() {
    let h = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/gsr.h")).unwrap();
    for name in [
        "gsr_xi",
        "gsr_report_evaluate",
        "gsr_report_free",
        "gsr_optimize",
        "gsr_simulate",
        "GSR_STATUS_PANIC",
    ] {
        assert!(h.contains(name), "{name} missing from header");
    }
    assert!(h.contains("typedef struct GsrReport GsrReport;"));
}
