//! C interface to `hawkes-decomp`.
//!
//! Objects cross the boundary as opaque handles that the caller releases
//! with the matching `*_free` function. Every fallible call returns an
//! [`HdStatus`]; on failure a description is available from
//! [`hd_last_error`] until the next call on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use hawkes_decomp::likelihood::log_likelihood;
use hawkes_decomp::search::{decompose, DecomposeConfig, DecompositionResult};
use hawkes_decomp::simulate::simulate;
use hawkes_decomp::{Error, EventSequence, HawkesModel};

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HdStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidSequence = 3,
    NonStationary = 4,
    NoStationaryModel = 5,
    Numerical = 6,
    BufferTooSmall = 7,
    Panic = 8,
}

/// A Hawkes model (background rate and kernel).
pub struct HdModel(HawkesModel);

/// An event sequence on `[0, horizon]`.
pub struct HdEvents(EventSequence);

/// Output of a decomposition run.
pub struct HdResult(DecompositionResult);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> HdStatus {
    match err.root() {
        Error::InvalidParameter(_) | Error::SupportMismatch { .. } | Error::Parse { .. } => HdStatus::InvalidArgument,
        Error::InvalidSequence(_) | Error::BlowUp { .. } => HdStatus::InvalidSequence,
        Error::NonStationary(_) => HdStatus::NonStationary,
        Error::NoStationaryModel => HdStatus::NoStationaryModel,
        Error::DegenerateSpectrum(_) | Error::OptimizerFailure { .. } => HdStatus::Numerical,
        _ => HdStatus::InvalidArgument,
    }
}

/// Runs `f`, recording errors and turning panics into [`HdStatus::Panic`].
fn guard(f: impl FnOnce() -> Result<(), HdStatus>) -> HdStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => HdStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("internal panic");
            HdStatus::Panic
        }
    }
}

fn fail(err: Error) -> HdStatus {
    set_error(&err.to_string());
    status_of(&err)
}

fn null() -> HdStatus {
    set_error("null pointer argument");
    HdStatus::NullPointer
}

unsafe fn str_arg<'a>(s: *const c_char) -> Result<&'a str, HdStatus> {
    if s.is_null() {
        return Err(null());
    }
    CStr::from_ptr(s).to_str().map_err(|_| {
        set_error("string argument is not valid UTF-8");
        HdStatus::InvalidArgument
    })
}

unsafe fn put<T>(out: *mut *mut T, value: T) {
    *out = Box::into_raw(Box::new(value));
}

/// Description of the last failure on this thread, or NULL. The pointer is
/// valid until the next call into this library from the same thread.
#[no_mangle]
pub extern "C" fn hd_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Parses a model from JSON such as
/// `{"mu":1.0,"kernel":{"type":"EXP","alpha":0.5,"beta":1.0}}`.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hd_model_from_json(json: *const c_char, out: *mut *mut HdModel) -> HdStatus {
    guard(|| {
        if out.is_null() {
            return Err(null());
        }
        let text = str_arg(json)?;
        let parsed: HawkesModel = serde_json::from_str(text).map_err(|e| {
            set_error(&e.to_string());
            HdStatus::InvalidArgument
        })?;
        let model = HawkesModel::new(parsed.mu, parsed.kernel).map_err(fail)?;
        put(out, HdModel(model));
        Ok(())
    })
}

/// # Safety
/// `model` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn hd_model_free(model: *mut HdModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Kernel norm (or upper bound, flagged by `is_bound`) and the verdict.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn hd_model_stationarity(
    model: *const HdModel,
    norm: *mut f64,
    is_bound: *mut bool,
    stationary: *mut bool,
) -> HdStatus {
    guard(|| {
        if model.is_null() || norm.is_null() || is_bound.is_null() || stationary.is_null() {
            return Err(null());
        }
        let v = (*model).0.kernel.stationarity().map_err(fail)?;
        *norm = v.norm_value;
        *is_bound = v.is_bound;
        *stationary = v.stationary;
        Ok(())
    })
}

/// Builds a sequence from `n` strictly increasing times in `[0, horizon]`.
///
/// # Safety
/// `times` must point to `n` doubles (may be NULL when `n == 0`).
#[no_mangle]
pub unsafe extern "C" fn hd_events_new(times: *const f64, n: usize, horizon: f64, out: *mut *mut HdEvents) -> HdStatus {
    guard(|| {
        if out.is_null() || (times.is_null() && n > 0) {
            return Err(null());
        }
        let v = if n == 0 {
            Vec::new()
        } else {
            std::slice::from_raw_parts(times, n).to_vec()
        };
        let seq = EventSequence::new(v, horizon).map_err(fail)?;
        put(out, HdEvents(seq));
        Ok(())
    })
}

/// Number of events, 0 for NULL.
///
/// # Safety
/// `events` must be NULL or come from this library.
#[no_mangle]
pub unsafe extern "C" fn hd_events_len(events: *const HdEvents) -> usize {
    events.as_ref().map_or(0, |e| e.0.len())
}

/// # Safety
/// `events` must be NULL or come from this library.
#[no_mangle]
pub unsafe extern "C" fn hd_events_horizon(events: *const HdEvents) -> f64 {
    events.as_ref().map_or(f64::NAN, |e| e.0.horizon())
}

/// Copies the event times into `buf` (capacity `cap`); fails with
/// `BufferTooSmall` when `cap < hd_events_len(events)`.
///
/// # Safety
/// `buf` must point to `cap` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn hd_events_copy_times(events: *const HdEvents, buf: *mut f64, cap: usize) -> HdStatus {
    guard(|| {
        let events = events.as_ref().ok_or_else(null)?;
        let times = events.0.times();
        if times.len() > cap {
            set_error(&format!("buffer holds {cap} values, {} needed", times.len()));
            return Err(HdStatus::BufferTooSmall);
        }
        if !times.is_empty() {
            if buf.is_null() {
                return Err(null());
            }
            ptr::copy_nonoverlapping(times.as_ptr(), buf, times.len());
        }
        Ok(())
    })
}

/// # Safety
/// `events` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn hd_events_free(events: *mut HdEvents) {
    if !events.is_null() {
        drop(Box::from_raw(events));
    }
}

/// Simulates the model on `[0, horizon]` with a seeded generator.
///
/// # Safety
/// `model` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn hd_simulate(
    model: *const HdModel,
    horizon: f64,
    seed: u64,
    out: *mut *mut HdEvents,
) -> HdStatus {
    guard(|| {
        let model = model.as_ref().ok_or_else(null)?;
        if out.is_null() {
            return Err(null());
        }
        let seq = simulate(&model.0, horizon, seed).map_err(fail)?;
        put(out, HdEvents(seq));
        Ok(())
    })
}

/// Log-likelihood of the events under the model; `-INFINITY` when some
/// intensity is not positive.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn hd_log_likelihood(model: *const HdModel, events: *const HdEvents, out: *mut f64) -> HdStatus {
    guard(|| {
        let model = model.as_ref().ok_or_else(null)?;
        let events = events.as_ref().ok_or_else(null)?;
        if out.is_null() {
            return Err(null());
        }
        *out = log_likelihood(&model.0, &events.0).value;
        Ok(())
    })
}

/// Runs the decomposition. `config_json` may be NULL for defaults or a JSON
/// object with any of `resolution`, `percentile`, `tau_max`, `eta`,
/// `holdout`, `split_time`, `gd_restarts`, `quadrature_fallback`,
/// `additive_refit`.
///
/// # Safety
/// `events` and `out` must be valid; `config_json` NULL or NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn hd_decompose(
    events: *const HdEvents,
    config_json: *const c_char,
    out: *mut *mut HdResult,
) -> HdStatus {
    guard(|| {
        let events = events.as_ref().ok_or_else(null)?;
        if out.is_null() {
            return Err(null());
        }
        let config: DecomposeConfig = if config_json.is_null() {
            DecomposeConfig::default()
        } else {
            serde_json::from_str(str_arg(config_json)?).map_err(|e| {
                set_error(&e.to_string());
                HdStatus::InvalidArgument
            })?
        };
        let result = decompose(&events.0, &config).map_err(fail)?;
        put(out, HdResult(result));
        Ok(())
    })
}

/// The selected model as a new handle.
///
/// # Safety
/// `result` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn hd_result_model(result: *const HdResult, out: *mut *mut HdModel) -> HdStatus {
    guard(|| {
        let result = result.as_ref().ok_or_else(null)?;
        if out.is_null() {
            return Err(null());
        }
        put(out, HdModel(result.0.model));
        Ok(())
    })
}

/// Serializes the result as JSON into a new string released with
/// [`hd_string_free`].
///
/// # Safety
/// `result` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn hd_result_to_json(result: *const HdResult, out: *mut *mut c_char) -> HdStatus {
    guard(|| {
        let result = result.as_ref().ok_or_else(null)?;
        if out.is_null() {
            return Err(null());
        }
        let text = serde_json::to_string(&result.0).map_err(|e| {
            set_error(&e.to_string());
            HdStatus::InvalidArgument
        })?;
        *out = CString::new(text).unwrap_or_default().into_raw();
        Ok(())
    })
}

/// # Safety
/// `result` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn hd_result_free(result: *mut HdResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}

/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn hd_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
