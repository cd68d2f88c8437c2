//! C ABI for `gsr-core`.
//!
//! Every function returns a [`GsrStatus`]. On failure the message is kept in
//! a per-thread slot readable through [`gsr_last_error_message`]. Reports are
//! opaque handles owned by the caller and released with [`gsr_report_free`].
//! Panics never cross the boundary; they surface as `GSR_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use gsr_core::metrics::{evaluate, NumericsConfig, PerformanceReport, SaddArgmax};
use gsr_core::montecarlo::{estimate_add_k, estimate_arl, ChangePoint, SimulationPlan};
use gsr_core::optimizer::{calibrate_threshold, optimize_design, SearchConfig};
use gsr_core::{ChartDesign, GsrError, ModelParams};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GsrStatus {
    Ok = 0,
    NullPointer = 1,
    /// Argument outside the model's domain (zero shift, `r >= A`, ...).
    Domain = 2,
    Configuration = 3,
    Numerical = 4,
    InsufficientSamples = 5,
    Panic = 6,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn fail(e: GsrError) -> GsrStatus {
    let status = match e {
        GsrError::Domain(_) => GsrStatus::Domain,
        GsrError::Configuration(_) => GsrStatus::Configuration,
        GsrError::Numerical { .. } => GsrStatus::Numerical,
        GsrError::InsufficientSamples(_) => GsrStatus::InsufficientSamples,
    };
    set_error(e.to_string());
    status
}

fn guard(f: impl FnOnce() -> Result<(), GsrStatus>) -> GsrStatus {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => GsrStatus::Ok,
        Ok(Err(status)) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal panic: {msg}"));
            GsrStatus::Panic
        }
    }
}

fn null_check<T>(p: *const T, name: &str) -> Result<(), GsrStatus> {
    if p.is_null() {
        set_error(format!("{name} is null"));
        Err(GsrStatus::NullPointer)
    } else {
        Ok(())
    }
}

fn numerics(resolution: usize) -> NumericsConfig {
    let mut n = NumericsConfig::default();
    if resolution > 0 {
        n.resolution = resolution;
    }
    n
}

/// Message of the last failed call on this thread, or null. The pointer is
/// valid until the next call into this library from the same thread.
#[no_mangle]
pub extern "C" fn gsr_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Limiting average exponential overshoot for shift `mu`.
///
/// # Safety
/// `out` must be null or point to writable memory for one `double`.
#[no_mangle]
pub unsafe extern "C" fn gsr_xi(mu: f64, out: *mut f64) -> GsrStatus {
    guard(|| {
        null_check(out, "out")?;
        let params = ModelParams::new(mu).map_err(fail)?;
        *out = params.xi();
        Ok(())
    })
}

/// Control limit giving ARL `gamma` at headstart `r`. A zero `resolution`
/// selects the default.
///
/// # Safety
/// `limit_out` and `arl_out` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn gsr_calibrate(
    mu: f64,
    r: f64,
    gamma: f64,
    rel_tol: f64,
    resolution: usize,
    limit_out: *mut f64,
    arl_out: *mut f64,
) -> GsrStatus {
    guard(|| {
        null_check(limit_out, "limit_out")?;
        null_check(arl_out, "arl_out")?;
        let params = ModelParams::new(mu).map_err(fail)?;
        let cal = calibrate_threshold(&params, r, gamma, rel_tol, numerics(resolution).resolution)
            .map_err(fail)?;
        *limit_out = cal.limit;
        *arl_out = cal.arl;
        Ok(())
    })
}

/// Evaluated design. Opaque to C.
pub struct GsrReport {
    inner: PerformanceReport,
}

/// Scalar part of a report. `sadd_argmax` is -1 when the supremum is the
/// steady-state limit.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct GsrSummary {
    pub arl: f64,
    pub add0: f64,
    pub sadd: f64,
    pub sadd_argmax: i64,
    pub iadd: f64,
    pub riadd: f64,
    pub stadd: f64,
    pub lower_bound: f64,
    pub steady_state_add: f64,
}

/// Evaluate the design `(mu, r, limit)`. On success `*out` owns a new report.
///
/// # Safety
/// `out` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn gsr_report_evaluate(
    mu: f64,
    r: f64,
    limit: f64,
    resolution: usize,
    out: *mut *mut GsrReport,
) -> GsrStatus {
    guard(|| {
        null_check(out, "out")?;
        *out = ptr::null_mut();
        let design = ChartDesign::new(mu, r, limit).map_err(fail)?;
        let inner = evaluate(&design, &numerics(resolution)).map_err(fail)?;
        *out = Box::into_raw(Box::new(GsrReport { inner }));
        Ok(())
    })
}

/// Release a report. Null is ignored.
///
/// # Safety
/// `report` must come from [`gsr_report_evaluate`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn gsr_report_free(report: *mut GsrReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// # Safety
/// `report` must be a live handle; `out` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn gsr_report_summary(
    report: *const GsrReport,
    out: *mut GsrSummary,
) -> GsrStatus {
    guard(|| {
        null_check(report, "report")?;
        null_check(out, "out")?;
        let r = &(*report).inner;
        *out = GsrSummary {
            arl: r.arl,
            add0: r.add0,
            sadd: r.sadd,
            sadd_argmax: match r.sadd_argmax {
                SaddArgmax::Finite(k) => k as i64,
                SaddArgmax::Limit => -1,
            },
            iadd: r.iadd,
            riadd: r.riadd,
            stadd: r.stadd,
            lower_bound: r.lower_bound,
            steady_state_add: r.profile.steady_state_add,
        };
        Ok(())
    })
}

/// Number of computed `ADD_k` values, or 0 for a null handle.
///
/// # Safety
/// `report` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gsr_report_profile_len(report: *const GsrReport) -> usize {
    if report.is_null() {
        0
    } else {
        (*report).inner.profile.add.len()
    }
}

/// Copy up to `len` entries of `ADD_k` and `P_inf(T > k)`. Either output may
/// be null to skip it. `*written` receives the number of entries copied.
///
/// # Safety
/// Non-null outputs must hold `len` doubles; `written` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gsr_report_profile(
    report: *const GsrReport,
    add_out: *mut f64,
    survival_out: *mut f64,
    len: usize,
    written: *mut usize,
) -> GsrStatus {
    guard(|| {
        null_check(report, "report")?;
        null_check(written, "written")?;
        let p = &(*report).inner.profile;
        let n = len.min(p.add.len());
        if !add_out.is_null() {
            ptr::copy_nonoverlapping(p.add.as_ptr(), add_out, n);
        }
        if !survival_out.is_null() {
            ptr::copy_nonoverlapping(p.survival.as_ptr(), survival_out, n);
        }
        *written = n;
        Ok(())
    })
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct GsrDesign {
    pub r_star: f64,
    pub a_star: f64,
    pub sadd: f64,
    pub lower_bound: f64,
    pub gap: f64,
    pub arl_achieved: f64,
}

/// Optimal headstart and limit at ARL `gamma`.
///
/// # Safety
/// `out` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn gsr_optimize(
    mu: f64,
    gamma: f64,
    resolution: usize,
    out: *mut GsrDesign,
) -> GsrStatus {
    guard(|| {
        null_check(out, "out")?;
        let config = SearchConfig {
            numerics: numerics(resolution),
            ..SearchConfig::default()
        };
        let d = optimize_design(mu, gamma, &config).map_err(fail)?;
        *out = GsrDesign {
            r_star: d.r_star,
            a_star: d.a_star,
            sadd: d.sadd,
            lower_bound: d.lower_bound,
            gap: d.gap,
            arl_achieved: d.arl_achieved,
        };
        Ok(())
    })
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct GsrEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub effective_replications: u64,
}

/// Monte Carlo estimate of the ARL (`change_point < 0`) or of `ADD_k` with
/// the change after sample `change_point`.
///
/// # Safety
/// `out` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn gsr_simulate(
    mu: f64,
    r: f64,
    limit: f64,
    change_point: i64,
    replications: u64,
    seed: u64,
    out: *mut GsrEstimate,
) -> GsrStatus {
    guard(|| {
        null_check(out, "out")?;
        let design = ChartDesign::new(mu, r, limit).map_err(fail)?;
        let est = if change_point < 0 {
            let plan = SimulationPlan::new(design, ChangePoint::Never, replications, seed)
                .map_err(fail)?;
            estimate_arl(&plan).map_err(fail)?
        } else {
            let plan = SimulationPlan::new(
                design,
                ChangePoint::At(change_point as u64),
                replications,
                seed,
            )
            .map_err(fail)?;
            estimate_add_k(&plan).map_err(fail)?.delay
        };
        *out = GsrEstimate {
            estimate: est.estimate,
            std_error: est.std_error,
            effective_replications: est.effective_replications,
        };
        Ok(())
    })
}
