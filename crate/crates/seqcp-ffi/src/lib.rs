//! C ABI for the seqcp monitoring engine.
//!
//! The surface is a classic opaque-handle design: `seqcp_monitor_new`
//! allocates a monitor behind a pointer, `seqcp_monitor_step` feeds one
//! observation and fills a plain decision struct, and every call returns a
//! `SeqcpStatus` error code. Kernel, scheme and normalization arguments are
//! passed as the integer values of the exported enums so that forged values
//! coming across the boundary are rejected instead of being undefined
//! behavior.
//!
//! A monitor handle is not synchronized; drive it from one thread at a time
//! (distinct handles are independent). Every handle returned by
//! `seqcp_monitor_new` must be released with `seqcp_monitor_free`.

use std::ffi::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};

use seqcp::critvals::{self, LimitFunctionalSpec};
use seqcp::kernels::KernelSpec;
use seqcp::monitor::{init_monitor, step, Decision, HistoricSummary, MonitorState};
use seqcp::weights::{Normalization, WeightConfig};
use seqcp::{Error, KernelKind, Scheme, VariancePolicy};

/// Result code of every FFI call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeqcpStatus {
    SeqcpOk = 0,
    SeqcpNullPointer = 1,
    SeqcpInvalidArgument = 2,
    SeqcpInsufficientData = 3,
    SeqcpNonFiniteObservation = 4,
    SeqcpInternalError = 5,
}

/// Kernel selector (pass as the integer value).
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeqcpKernel {
    SeqcpKernelDom = 0,
    SeqcpKernelWilcoxon = 1,
    SeqcpKernelSymmetricSum = 2,
}

/// Monitoring scheme selector.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeqcpScheme {
    SeqcpSchemeCusum = 0,
    SeqcpSchemeMmosum = 1,
    SeqcpSchemePageCusum = 2,
}

/// Normalization selector.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeqcpNormalization {
    SeqcpNormalizationHomoscedastic = 0,
    SeqcpNormalizationHeteroscedastic = 1,
}

/// Decision at one monitoring time. When `rejected` is set, `stopped_at`
/// holds the (frozen) stopping time and `stat`/`margin` are NaN; otherwise
/// `stat` is the normalized statistic and `margin` its distance from the
/// critical value.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SeqcpDecision {
    pub rejected: bool,
    pub stopped_at: usize,
    pub stat: f64,
    pub margin: f64,
}

/// Opaque monitor handle.
pub struct SeqcpMonitor {
    summary: HistoricSummary,
    state: MonitorState,
}

fn status_of(err: &Error) -> SeqcpStatus {
    match err {
        Error::InsufficientHistoricData { .. } | Error::EmptyReferenceSample => {
            SeqcpStatus::SeqcpInsufficientData
        }
        Error::NonFiniteObservation { .. } => SeqcpStatus::SeqcpNonFiniteObservation,
        Error::InvalidParameter(_)
        | Error::WeightUndefinedAtNonpositiveTime { .. }
        | Error::NonpositiveScale { .. }
        | Error::MagnitudeRequiresPostChangeMean
        | Error::BudgetExceeded { .. } => SeqcpStatus::SeqcpInvalidArgument,
        _ => SeqcpStatus::SeqcpInternalError,
    }
}

fn kernel_from(code: i32) -> Option<KernelKind> {
    match code {
        0 => Some(KernelKind::Dom),
        1 => Some(KernelKind::Wilcoxon),
        2 => Some(KernelKind::SymmetricSum),
        _ => None,
    }
}

fn scheme_from(code: i32) -> Option<Scheme> {
    match code {
        0 => Some(Scheme::Cusum),
        1 => Some(Scheme::MMosum),
        2 => Some(Scheme::PageCusum),
        _ => None,
    }
}

fn normalization_from(code: i32) -> Option<Normalization> {
    match code {
        0 => Some(Normalization::Homoscedastic),
        1 => Some(Normalization::Heteroscedastic),
        _ => None,
    }
}

fn guarded(body: impl FnOnce() -> SeqcpStatus) -> SeqcpStatus {
    catch_unwind(AssertUnwindSafe(body)).unwrap_or(SeqcpStatus::SeqcpInternalError)
}

#[allow(clippy::too_many_arguments)]
fn monitor_new_impl(
    historic: &[f64],
    kernel: i32,
    scheme: i32,
    gamma: f64,
    mmosum_b: f64,
    burn_in: usize,
    normalization: i32,
    c_alpha: f64,
    variances: Option<(f64, f64)>,
) -> Result<SeqcpMonitor, Error> {
    let kernel = kernel_from(kernel)
        .ok_or_else(|| Error::InvalidParameter(format!("unknown kernel code {kernel}")))?;
    let scheme = scheme_from(scheme)
        .ok_or_else(|| Error::InvalidParameter(format!("unknown scheme code {scheme}")))?;
    let normalization = normalization_from(normalization).ok_or_else(|| {
        Error::InvalidParameter(format!("unknown normalization code {normalization}"))
    })?;
    let burn_in = if burn_in == 0 {
        WeightConfig::default_burn_in(historic.len())
    } else {
        burn_in
    };
    let cfg = WeightConfig::new(gamma, burn_in, mmosum_b)?.with_normalization(normalization);
    let mut spec = KernelSpec::new(kernel);
    if let Some((sigma1_sq, sigma2_sq)) = variances {
        spec = spec.with_variance_policy(VariancePolicy::UserSupplied {
            sigma1_sq,
            sigma2_sq,
        });
    }
    let (summary, state) = init_monitor(historic, spec, scheme, cfg, c_alpha)?;
    Ok(SeqcpMonitor { summary, state })
}

unsafe fn write_monitor(
    out: *mut *mut SeqcpMonitor,
    result: Result<SeqcpMonitor, Error>,
) -> SeqcpStatus {
    match result {
        Ok(monitor) => {
            *out = Box::into_raw(Box::new(monitor));
            SeqcpStatus::SeqcpOk
        }
        Err(e) => status_of(&e),
    }
}

/// Create a monitor over a change-free historic sample. `burn_in = 0`
/// selects the default of ceil(sqrt(len)). On success `*out` owns the
/// handle.
///
/// # Safety
/// `historic` must point to `len` readable doubles and `out` must be a valid
/// location for one pointer.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn seqcp_monitor_new(
    historic: *const f64,
    len: usize,
    kernel: i32,
    scheme: i32,
    gamma: f64,
    mmosum_b: f64,
    burn_in: usize,
    normalization: i32,
    c_alpha: f64,
    out: *mut *mut SeqcpMonitor,
) -> SeqcpStatus {
    if historic.is_null() || out.is_null() {
        return SeqcpStatus::SeqcpNullPointer;
    }
    let sample = std::slice::from_raw_parts(historic, len);
    guarded(|| {
        write_monitor(
            out,
            monitor_new_impl(
                sample,
                kernel,
                scheme,
                gamma,
                mmosum_b,
                burn_in,
                normalization,
                c_alpha,
                None,
            ),
        )
    })
}

/// Like `seqcp_monitor_new`, but with caller-supplied variances of the two
/// linear kernel parts (e.g. long-run variances for dependent data).
///
/// # Safety
/// Same contract as [`seqcp_monitor_new`].
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn seqcp_monitor_new_with_variances(
    historic: *const f64,
    len: usize,
    kernel: i32,
    scheme: i32,
    gamma: f64,
    mmosum_b: f64,
    burn_in: usize,
    normalization: i32,
    c_alpha: f64,
    sigma1_sq: f64,
    sigma2_sq: f64,
    out: *mut *mut SeqcpMonitor,
) -> SeqcpStatus {
    if historic.is_null() || out.is_null() {
        return SeqcpStatus::SeqcpNullPointer;
    }
    let sample = std::slice::from_raw_parts(historic, len);
    guarded(|| {
        write_monitor(
            out,
            monitor_new_impl(
                sample,
                kernel,
                scheme,
                gamma,
                mmosum_b,
                burn_in,
                normalization,
                c_alpha,
                Some((sigma1_sq, sigma2_sq)),
            ),
        )
    })
}

/// Feed one observation. After an alarm the monitor is frozen and keeps
/// returning the stored stopping time.
///
/// # Safety
/// `monitor` must be a live handle from a constructor; `decision` must be a
/// valid location for one `SeqcpDecision`.
#[no_mangle]
pub unsafe extern "C" fn seqcp_monitor_step(
    monitor: *mut SeqcpMonitor,
    x: f64,
    decision: *mut SeqcpDecision,
) -> SeqcpStatus {
    if monitor.is_null() || decision.is_null() {
        return SeqcpStatus::SeqcpNullPointer;
    }
    let handle = &mut *monitor;
    guarded(|| match step(&handle.summary, &mut handle.state, x) {
        Ok(Decision::Continue { stat, margin }) => {
            *decision = SeqcpDecision {
                rejected: false,
                stopped_at: 0,
                stat,
                margin,
            };
            SeqcpStatus::SeqcpOk
        }
        Ok(Decision::Reject { at }) => {
            *decision = SeqcpDecision {
                rejected: true,
                stopped_at: at,
                stat: f64::NAN,
                margin: f64::NAN,
            };
            SeqcpStatus::SeqcpOk
        }
        Err(e) => status_of(&e),
    })
}

/// Query the stopping time without feeding data. `*stopped` is false while
/// the monitor is still running.
///
/// # Safety
/// All pointers must be valid; `monitor` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn seqcp_monitor_stopped_at(
    monitor: *const SeqcpMonitor,
    stopped: *mut bool,
    at: *mut usize,
) -> SeqcpStatus {
    if monitor.is_null() || stopped.is_null() || at.is_null() {
        return SeqcpStatus::SeqcpNullPointer;
    }
    let handle = &*monitor;
    match handle.state.stopped_at() {
        Some(k) => {
            *stopped = true;
            *at = k;
        }
        None => {
            *stopped = false;
            *at = 0;
        }
    }
    SeqcpStatus::SeqcpOk
}

/// Release a handle. Passing NULL is a no-op.
///
/// # Safety
/// `monitor` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn seqcp_monitor_free(monitor: *mut SeqcpMonitor) {
    if !monitor.is_null() {
        drop(Box::from_raw(monitor));
    }
}

/// Simulate the limit distribution of the given scheme and return the
/// critical value at level `alpha`. This runs a full Monte-Carlo simulation
/// (`grid_points` x `replications` Gaussian increments), so cache the result
/// on the caller side.
///
/// # Safety
/// `out` must be a valid location for one double.
#[no_mangle]
pub unsafe extern "C" fn seqcp_critical_value(
    scheme: i32,
    gamma: f64,
    b: f64,
    normalization: i32,
    grid_points: usize,
    replications: usize,
    seed: u64,
    alpha: f64,
    out: *mut f64,
) -> SeqcpStatus {
    if out.is_null() {
        return SeqcpStatus::SeqcpNullPointer;
    }
    guarded(|| {
        let build = || -> Result<f64, Error> {
            let scheme = scheme_from(scheme)
                .ok_or_else(|| Error::InvalidParameter(format!("unknown scheme code {scheme}")))?;
            let normalization = normalization_from(normalization).ok_or_else(|| {
                Error::InvalidParameter(format!("unknown normalization code {normalization}"))
            })?;
            let spec = LimitFunctionalSpec::new(
                scheme,
                gamma,
                b,
                normalization,
                grid_points,
                replications,
                seed,
            )?;
            critvals::simulate_limit(&spec)?.critical_value(alpha)
        };
        match build() {
            Ok(c) => {
                *out = c;
                SeqcpStatus::SeqcpOk
            }
            Err(e) => status_of(&e),
        }
    })
}

/// Static description of a status code (never NULL).
#[no_mangle]
pub extern "C" fn seqcp_status_message(status: SeqcpStatus) -> *const c_char {
    let msg: &'static [u8] = match status {
        SeqcpStatus::SeqcpOk => b"ok\0",
        SeqcpStatus::SeqcpNullPointer => b"null pointer argument\0",
        SeqcpStatus::SeqcpInvalidArgument => b"invalid argument\0",
        SeqcpStatus::SeqcpInsufficientData => b"insufficient historic data\0",
        SeqcpStatus::SeqcpNonFiniteObservation => b"non-finite observation\0",
        SeqcpStatus::SeqcpInternalError => b"internal error\0",
    };
    msg.as_ptr() as *const c_char
}
