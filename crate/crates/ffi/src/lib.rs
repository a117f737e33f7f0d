//! C ABI over `smoothext`.
//!
//! Every function returns an [`SxStatus`]; results go through out-pointers.
//! On failure a message is kept per thread and can be read with
//! [`sx_last_error_message`]. Evaluators are opaque handles released with
//! [`sx_evaluator_free`]; strings handed out by the library are released with
//! [`sx_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::sync::Arc;

use smoothext::catalog::{make_oracle, OrderBound};
use smoothext::config::Config;
use smoothext::extension::{BuildOptions, Construction, Role, SmoothEvaluator};
use smoothext::mollifier;
use smoothext::open_set::OpenSet;
use smoothext::run::{self, RunOptions};
use smoothext::Error;

/// Result codes shared by every entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SxStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Domain = 3,
    OrderExceeded = 4,
    DepthExceeded = 5,
    Construction = 6,
    Config = 7,
    Io = 8,
    /// Some verification check failed (only from [`sx_run_config`]).
    ChecksFailed = 9,
    Panic = 10,
}

/// Opaque evaluator for `g`, `h` or a cozero witness.
pub struct SxEvaluator {
    inner: SmoothEvaluator,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn status_of(e: &Error) -> SxStatus {
    match e {
        Error::Domain(_) => SxStatus::Domain,
        Error::Validation(_)
        | Error::Contract(_)
        | Error::UnknownFunction(_)
        | Error::InvalidParams { .. } => SxStatus::InvalidArgument,
        Error::DepthExceeded { .. } => SxStatus::DepthExceeded,
        Error::OrderExceeded { .. } => SxStatus::OrderExceeded,
        Error::Construction(_) => SxStatus::Construction,
        Error::Config(_) | Error::Json(_) => SxStatus::Config,
        Error::Io(_) | Error::Csv(_) => SxStatus::Io,
    }
}

struct Failure(SxStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(SxStatus::NullPointer, format!("{what} is null"))
}

/// Runs `body`, records any error and converts panics into [`SxStatus::Panic`].
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> SxStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => SxStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            SxStatus::Panic
        }
    }
}

unsafe fn c_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        Failure(
            SxStatus::InvalidArgument,
            format!("{what} is not valid UTF-8"),
        )
    })
}

unsafe fn open_set(lo: *const f64, hi: *const f64, count: usize) -> Result<OpenSet, Failure> {
    if count == 0 {
        return Ok(OpenSet::empty());
    }
    if lo.is_null() || hi.is_null() {
        return Err(null("interval endpoint array"));
    }
    let lo = std::slice::from_raw_parts(lo, count);
    let hi = std::slice::from_raw_parts(hi, count);
    let raw: Vec<(f64, f64)> = lo.iter().copied().zip(hi.iter().copied()).collect();
    Ok(OpenSet::normalize(&raw)?)
}

fn options(max_depth: u32) -> BuildOptions {
    let mut o = BuildOptions::default();
    if max_depth > 0 {
        o.max_depth = max_depth as usize;
    }
    o
}

fn boxed(e: SmoothEvaluator) -> *mut SxEvaluator {
    Box::into_raw(Box::new(SxEvaluator { inner: e }))
}

/// Builds the extension `h = f·g` of a catalog function from the open set
/// `⋃ (lo[j], hi[j])`.
///
/// `params_json` may be null (catalog defaults) or a JSON object.
/// `k < 0` means C^∞. `max_depth = 0` selects the default depth.
/// On success `*out` holds an evaluator for `h`.
///
/// # Safety
/// `lo` and `hi` must point to `count` doubles, the strings must be
/// NUL-terminated, and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sx_build_extension(
    lo: *const f64,
    hi: *const f64,
    count: usize,
    function_id: *const c_char,
    params_json: *const c_char,
    k: i32,
    max_depth: u32,
    out: *mut *mut SxEvaluator,
) -> SxStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let u = open_set(lo, hi, count)?;
        let id = c_str(function_id, "function_id")?;
        let params = if params_json.is_null() {
            serde_json::Map::new()
        } else {
            match serde_json::from_str::<serde_json::Value>(c_str(params_json, "params_json")?) {
                Ok(serde_json::Value::Object(m)) => m,
                Ok(_) => {
                    return Err(Failure(
                        SxStatus::InvalidArgument,
                        "params_json must be an object".into(),
                    ))
                }
                Err(e) => {
                    return Err(Failure(
                        SxStatus::InvalidArgument,
                        format!("params_json: {e}"),
                    ))
                }
            }
        };
        let bound = if k < 0 {
            OrderBound::Infinite
        } else {
            OrderBound::Finite(k as usize)
        };
        let oracle = make_oracle(id, &params, u.clone())?;
        let c = Construction::build(&u, Arc::new(oracle), bound, options(max_depth))?;
        *out = boxed(SmoothEvaluator::new(Role::H, Arc::new(c)));
        Ok(())
    })
}

/// Builds a C^∞ function that is positive exactly on `⋃ (lo[j], hi[j])`.
///
/// # Safety
/// As for [`sx_build_extension`].
#[no_mangle]
pub unsafe extern "C" fn sx_build_cozero(
    lo: *const f64,
    hi: *const f64,
    count: usize,
    max_depth: u32,
    out: *mut *mut SxEvaluator,
) -> SxStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let u = open_set(lo, hi, count)?;
        *out = boxed(smoothext::extension::build_cozero(&u, options(max_depth))?);
        Ok(())
    })
}

/// Creates a new handle for the taming multiplier `g` behind `e`.
///
/// # Safety
/// `e` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sx_evaluator_multiplier(
    e: *const SxEvaluator,
    out: *mut *mut SxEvaluator,
) -> SxStatus {
    guard(|| {
        let e = e.as_ref().ok_or_else(|| null("evaluator"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = match e.inner.construction() {
            Some(c) => boxed(SmoothEvaluator::new(Role::G, c.clone())),
            None => boxed(SmoothEvaluator::zero()),
        };
        Ok(())
    })
}

/// Value at `x`.
///
/// # Safety
/// `e` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sx_eval(e: *const SxEvaluator, x: f64, out: *mut f64) -> SxStatus {
    guard(|| {
        let e = e.as_ref().ok_or_else(|| null("evaluator"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        if x.is_nan() {
            return Err(Failure(SxStatus::Domain, "x is NaN".into()));
        }
        *out = e.inner.eval(x);
        Ok(())
    })
}

/// `order`-th derivative at `x`. Orders above the smoothness class give
/// [`SxStatus::OrderExceeded`].
///
/// # Safety
/// `e` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sx_eval_deriv(
    e: *const SxEvaluator,
    order: u32,
    x: f64,
    out: *mut f64,
) -> SxStatus {
    guard(|| {
        let e = e.as_ref().ok_or_else(|| null("evaluator"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = e.inner.eval_deriv(order as usize, x)?;
        Ok(())
    })
}

/// Writes the smoothness order into `*k`, or -1 for C^∞.
///
/// # Safety
/// `e` must be a live handle and `k` writable.
#[no_mangle]
pub unsafe extern "C" fn sx_evaluator_order(e: *const SxEvaluator, k: *mut i32) -> SxStatus {
    guard(|| {
        let e = e.as_ref().ok_or_else(|| null("evaluator"))?;
        let k = k.as_mut().ok_or_else(|| null("k"))?;
        *k = match e.inner.order_bound() {
            OrderBound::Infinite => -1,
            OrderBound::Finite(n) => i32::try_from(n).unwrap_or(i32::MAX),
        };
        Ok(())
    })
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `e` must come from this library and must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn sx_evaluator_free(e: *mut SxEvaluator) {
    if !e.is_null() {
        drop(Box::from_raw(e));
    }
}

/// The unnormalized bump `σ(x)`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sx_sigma(x: f64, out: *mut f64) -> SxStatus {
    guard(|| {
        *out.as_mut().ok_or_else(|| null("out"))? = mollifier::sigma(x)?;
        Ok(())
    })
}

/// The normalized mollifier `φ(x)`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sx_phi(x: f64, out: *mut f64) -> SxStatus {
    guard(|| {
        *out.as_mut().ok_or_else(|| null("out"))? = mollifier::phi(x)?;
        Ok(())
    })
}

/// The cumulative mollifier `Φ(x)`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sx_phi_big(x: f64, out: *mut f64) -> SxStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        if x.is_nan() {
            return Err(Failure(SxStatus::Domain, "x is NaN".into()));
        }
        *out = mollifier::phi_big(x);
        Ok(())
    })
}

/// Runs a JSON configuration (the command-line format) and stores the report
/// JSON in `*report_out`, to be released with [`sx_string_free`]. Returns
/// [`SxStatus::ChecksFailed`] when the run completes with failing checks;
/// the report is still written in that case. Configured output files are
/// written as well.
///
/// # Safety
/// `config_json` must be NUL-terminated and `report_out` writable.
#[no_mangle]
pub unsafe extern "C" fn sx_run_config(
    config_json: *const c_char,
    report_out: *mut *mut c_char,
) -> SxStatus {
    let mut failed = false;
    let status = guard(|| {
        if report_out.is_null() {
            return Err(null("report_out"));
        }
        *report_out = ptr::null_mut();
        let config = Config::from_json(c_str(config_json, "config_json")?)?;
        let (report, code) = run::run(&config, &RunOptions { timestamp: false })?;
        let text = serde_json::to_string_pretty(&report).map_err(Error::from)?;
        *report_out = CString::new(text)
            .expect("JSON has no interior NUL")
            .into_raw();
        failed = code != run::EXIT_OK;
        Ok(())
    });
    if status == SxStatus::Ok && failed {
        set_error("one or more checks failed");
        SxStatus::ChecksFailed
    } else {
        status
    }
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn sx_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Message for the most recent failure on this thread, or null. Valid until
/// the next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn sx_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_variants_map_to_distinct_codes() {
        assert_eq!(status_of(&Error::Domain("x".into())), SxStatus::Domain);
        assert_eq!(
            status_of(&Error::OrderExceeded { order: 3, bound: 2 }),
            SxStatus::OrderExceeded
        );
        assert_eq!(
            status_of(&Error::DepthExceeded {
                index: 9,
                max_depth: 8
            }),
            SxStatus::DepthExceeded
        );
        assert_eq!(
            status_of(&Error::UnknownFunction("q".into())),
            SxStatus::InvalidArgument
        );
    }

    #[test]
    fn panics_become_status_codes() {
        let s = guard(|| panic!("boom"));
        assert_eq!(s, SxStatus::Panic);
        assert!(!sx_last_error_message().is_null());
        assert_eq!(guard(|| Ok(())), SxStatus::Ok);
        assert!(sx_last_error_message().is_null());
    }
}
