//! C ABI over the rolling forecaster.
//!
//! Every function returns a [`QbsdStatus`]; on failure the message is kept
//! per thread and can be read with [`qbsd_last_error_message`]. Handles are
//! opaque and must be released with [`qbsd_forecaster_free`]. A handle is not
//! safe to use from two threads at once.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use qbsd::{compute_quartiles, Granularity, QbsdConfig, QbsdError, RollingForecaster};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QbsdStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InsufficientHistory = 3,
    OutsideRetainedWindow = 4,
    Misaligned = 5,
    NonFinite = 6,
    Panic = 99,
}

/// Opaque forecaster handle.
pub struct QbsdForecaster {
    inner: RollingForecaster,
}

/// Result of one forecast step. Residual fields are NaN when no actual value
/// was supplied.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QbsdStep {
    pub forecast: f64,
    pub q1: f64,
    pub q3: f64,
    pub iqr: f64,
    pub diff_residual: f64,
    pub norm_residual: f64,
    pub sample_count: usize,
    pub fallback_used: bool,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QbsdQuartiles {
    pub q1: f64,
    pub q3: f64,
    pub iqr: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn status_of(err: &QbsdError) -> QbsdStatus {
    match err {
        QbsdError::InsufficientHistory { .. } | QbsdError::InsufficientSpan { .. } => QbsdStatus::InsufficientHistory,
        QbsdError::OutsideRetainedWindow { .. } => QbsdStatus::OutsideRetainedWindow,
        QbsdError::GridMisaligned { .. } | QbsdError::NegativeTimestamp { .. } => QbsdStatus::Misaligned,
        QbsdError::NonFiniteValue(_) => QbsdStatus::NonFinite,
        _ => QbsdStatus::InvalidArgument,
    }
}

fn guard(f: impl FnOnce() -> Result<(), QbsdStatus>) -> QbsdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => QbsdStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("internal panic");
            QbsdStatus::Panic
        }
    }
}

fn fail(err: QbsdError) -> QbsdStatus {
    set_error(err.to_string());
    status_of(&err)
}

fn null(what: &str) -> QbsdStatus {
    set_error(format!("`{what}` is null"));
    QbsdStatus::NullPointer
}

/// Creates a forecaster on a grid of `interval_seconds` using the weekly
/// scheme with `n_weeks` lags and half-width `k` slots. `capacity` is the
/// retained history in slots, or 0 for the default of four weeks.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle pointer.
#[no_mangle]
pub unsafe extern "C" fn qbsd_forecaster_new(
    interval_seconds: u32,
    n_weeks: u32,
    k: u32,
    c: f64,
    capacity: u64,
    out: *mut *mut QbsdForecaster,
) -> QbsdStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let g = Granularity::new(interval_seconds).map_err(fail)?;
        let cfg = QbsdConfig::weekly(n_weeks, k, g, c).map_err(fail)?;
        let inner = if capacity == 0 {
            RollingForecaster::new(cfg, g)
        } else {
            RollingForecaster::with_capacity(cfg, g, capacity).map_err(fail)?
        };
        *out = Box::into_raw(Box::new(QbsdForecaster { inner }));
        Ok(())
    })
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `f` must be null or a handle from [`qbsd_forecaster_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn qbsd_forecaster_free(f: *mut QbsdForecaster) {
    if !f.is_null() {
        drop(Box::from_raw(f));
    }
}

/// Forecasts the slot at `timestamp`, scores `value` against it, then
/// buffers `value`. The value is buffered even when the forecast fails.
///
/// # Safety
/// `f` must be a live handle and `out` writable or null.
#[no_mangle]
pub unsafe extern "C" fn qbsd_forecaster_observe(
    f: *mut QbsdForecaster,
    timestamp: i64,
    value: f64,
    out: *mut QbsdStep,
) -> QbsdStatus {
    guard(|| {
        let f = f.as_mut().ok_or_else(|| null("f"))?;
        let obs = f.inner.observe_timestamp(timestamp, value).map_err(fail)?;
        if let Some(out) = out.as_mut() {
            let o = obs.forecast;
            *out = QbsdStep {
                forecast: o.forecast,
                q1: o.q1,
                q3: o.q3,
                iqr: o.iqr,
                diff_residual: obs.residuals.difference,
                norm_residual: obs.residuals.normalized,
                sample_count: o.sample_count,
                fallback_used: o.fallback_used,
            };
        }
        Ok(())
    })
}

/// Forecast for `timestamp` from the buffered history without changing it.
///
/// # Safety
/// `f` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn qbsd_forecaster_forecast_at(
    f: *const QbsdForecaster,
    timestamp: i64,
    out: *mut QbsdStep,
) -> QbsdStatus {
    guard(|| {
        let f = f.as_ref().ok_or_else(|| null("f"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let slot = qbsd::align(timestamp, f.inner.granularity()).map_err(fail)?;
        let o = f.inner.forecast_at(slot).map_err(fail)?;
        *out = QbsdStep {
            forecast: o.forecast,
            q1: o.q1,
            q3: o.q3,
            iqr: o.iqr,
            diff_residual: f64::NAN,
            norm_residual: f64::NAN,
            sample_count: o.sample_count,
            fallback_used: o.fallback_used,
        };
        Ok(())
    })
}

/// Buffers `len` values without forecasting. Stops at the first bad pair.
///
/// # Safety
/// `timestamps` and `values` must each point to `len` readable elements.
#[no_mangle]
pub unsafe extern "C" fn qbsd_forecaster_ingest(
    f: *mut QbsdForecaster,
    timestamps: *const i64,
    values: *const f64,
    len: usize,
) -> QbsdStatus {
    guard(|| {
        let f = f.as_mut().ok_or_else(|| null("f"))?;
        if len == 0 {
            return Ok(());
        }
        if timestamps.is_null() {
            return Err(null("timestamps"));
        }
        if values.is_null() {
            return Err(null("values"));
        }
        let ts = std::slice::from_raw_parts(timestamps, len);
        let vs = std::slice::from_raw_parts(values, len);
        let batch: Vec<(i64, f64)> = ts.iter().copied().zip(vs.iter().copied()).collect();
        f.inner.ingest_timestamps(&batch).map_err(fail)
    })
}

/// Number of buffered values, or 0 for a null handle.
///
/// # Safety
/// `f` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qbsd_forecaster_len(f: *const QbsdForecaster) -> usize {
    f.as_ref().map_or(0, |f| f.inner.len())
}

/// Linear-interpolation quartiles of `len` values.
///
/// # Safety
/// `values` must point to `len` readable elements and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn qbsd_compute_quartiles(values: *const f64, len: usize, out: *mut QbsdQuartiles) -> QbsdStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        if values.is_null() && len > 0 {
            return Err(null("values"));
        }
        let vs = if len == 0 { &[][..] } else { std::slice::from_raw_parts(values, len) };
        let q = compute_quartiles(vs).map_err(fail)?;
        *out = QbsdQuartiles { q1: q.q1, q3: q.q3, iqr: q.iqr };
        Ok(())
    })
}

/// Message of the last failure on this thread, or null. Valid until the next
/// failing call on the same thread.
#[no_mangle]
pub extern "C" fn qbsd_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Static name of a status code.
#[no_mangle]
pub extern "C" fn qbsd_status_str(status: QbsdStatus) -> *const c_char {
    let s: &'static CStr = match status {
        QbsdStatus::Ok => c"ok",
        QbsdStatus::NullPointer => c"null pointer",
        QbsdStatus::InvalidArgument => c"invalid argument",
        QbsdStatus::InsufficientHistory => c"insufficient history",
        QbsdStatus::OutsideRetainedWindow => c"outside retained window",
        QbsdStatus::Misaligned => c"timestamp not on grid",
        QbsdStatus::NonFinite => c"non-finite value",
        QbsdStatus::Panic => c"internal panic",
    };
    s.as_ptr()
}

#[no_mangle]
pub extern "C" fn qbsd_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
