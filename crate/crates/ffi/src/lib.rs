//! C ABI over `scd-core`.
//!
//! Handles are opaque and owned by the caller, who releases them with the
//! matching `*_free` function. Every fallible call returns an [`ScdStatus`];
//! the message of the last failure on the calling thread is available from
//! [`scd_last_error_message`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use scd_core::adversary::LowerBoundSource;
use scd_core::engine::{competitive_ratio, run, run_instance, RequestSource, RunOptions, Trace};
use scd_core::model::{load_instance, parse_instance, Instance};
use scd_core::opt::solve_opt;
use scd_core::{algorithm_by_name, Error};

/// Result codes; the first four match the command-line exit codes.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScdStatus {
    Ok = 0,
    /// A bound, contract or digest check failed.
    Violation = 1,
    /// A size guard was exceeded.
    Guard = 2,
    /// Malformed or invalid input.
    Input = 3,
    NullPointer = 4,
    /// A panic was caught at the boundary.
    Internal = 5,
}

/// A validated problem instance.
pub struct ScdInstance {
    inner: Instance,
}

/// The outcome of one run.
pub struct ScdTrace {
    inner: Trace,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).expect("nul bytes were replaced"));
}

fn status_of(err: &Error) -> ScdStatus {
    match err.exit_code() {
        1 => ScdStatus::Violation,
        2 => ScdStatus::Guard,
        _ => ScdStatus::Input,
    }
}

/// Run `f`, translating errors and panics into status codes.
fn guarded(f: impl FnOnce() -> Result<(), ScdStatus>) -> ScdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            ScdStatus::Ok
        }
        Ok(Err(status)) => status,
        Err(_) => {
            set_error("internal panic");
            ScdStatus::Internal
        }
    }
}

fn fail(err: Error) -> ScdStatus {
    set_error(err.to_string());
    status_of(&err)
}

fn null(what: &str) -> ScdStatus {
    set_error(format!("{what} is null"));
    ScdStatus::NullPointer
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, ScdStatus> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        set_error(format!("{what} is not valid UTF-8"));
        ScdStatus::Input
    })
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, ScdStatus> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &str) -> Result<&'a T, ScdStatus> {
    p.as_ref().ok_or_else(|| null(what))
}

/// Load an instance file.
///
/// # Safety
/// `path` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn scd_instance_load(path: *const c_char, out: *mut *mut ScdInstance) -> ScdStatus {
    guarded(|| {
        let path = str_arg(path, "path")?;
        let out = out_arg(out, "out")?;
        let inst = load_instance(path).map_err(fail)?;
        *out = Box::into_raw(Box::new(ScdInstance { inner: inst }));
        Ok(())
    })
}

/// Parse an instance from JSON text.
///
/// # Safety
/// `json` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn scd_instance_from_json(json: *const c_char, out: *mut *mut ScdInstance) -> ScdStatus {
    guarded(|| {
        let text = str_arg(json, "json")?;
        let out = out_arg(out, "out")?;
        let inst = parse_instance(text).map_err(fail)?;
        *out = Box::into_raw(Box::new(ScdInstance { inner: inst }));
        Ok(())
    })
}

/// # Safety
/// `inst` must come from this library and not be used afterwards; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn scd_instance_free(inst: *mut ScdInstance) {
    if !inst.is_null() {
        drop(Box::from_raw(inst));
    }
}

/// Element, set and request counts. Any output pointer may be null.
///
/// # Safety
/// `inst` must be a live instance handle; non-null outputs must be valid.
#[no_mangle]
pub unsafe extern "C" fn scd_instance_counts(
    inst: *const ScdInstance,
    elements: *mut usize,
    sets: *mut usize,
    requests: *mut usize,
) -> ScdStatus {
    guarded(|| {
        let inst = &ref_arg(inst, "inst")?.inner;
        if let Some(e) = elements.as_mut() {
            *e = inst.system.element_count();
        }
        if let Some(s) = sets.as_mut() {
            *s = inst.system.set_count();
        }
        if let Some(r) = requests.as_mut() {
            *r = inst.requests.len();
        }
        Ok(())
    })
}

/// Run an online algorithm (`onf`, `onr-request`, `onr-element`, `counter`, ...).
///
/// # Safety
/// Pointers must be valid; `algo` must be nul-terminated.
#[no_mangle]
pub unsafe extern "C" fn scd_run(
    inst: *const ScdInstance,
    algo: *const c_char,
    dt: f64,
    seed: u64,
    out: *mut *mut ScdTrace,
) -> ScdStatus {
    guarded(|| {
        let inst = &ref_arg(inst, "inst")?.inner;
        let name = str_arg(algo, "algo")?;
        let out = out_arg(out, "out")?;
        let mut algo = algorithm_by_name(name, inst.requests.len()).map_err(fail)?;
        let trace = run_instance(inst, algo.as_mut(), &RunOptions::new(dt, seed)).map_err(fail)?;
        *out = Box::into_raw(Box::new(ScdTrace { inner: trace }));
        Ok(())
    })
}

/// Run an algorithm against the adaptive lower-bound family of the given depth.
/// When `realized` is not null it receives the instance the run produced.
///
/// # Safety
/// Pointers must be valid; `algo` must be nul-terminated.
#[no_mangle]
pub unsafe extern "C" fn scd_run_lower_bound(
    depth: u32,
    algo: *const c_char,
    dt: f64,
    out: *mut *mut ScdTrace,
    realized: *mut *mut ScdInstance,
) -> ScdStatus {
    guarded(|| {
        let name = str_arg(algo, "algo")?;
        let out = out_arg(out, "out")?;
        let mut src = LowerBoundSource::new(depth as usize, false).map_err(fail)?;
        let mut algo = algorithm_by_name(name, 0).map_err(fail)?;
        let trace = run(&mut src, algo.as_mut(), &RunOptions::new(dt, 0)).map_err(fail)?;
        *out = Box::into_raw(Box::new(ScdTrace { inner: trace }));
        if let Some(r) = realized.as_mut() {
            *r = Box::into_raw(Box::new(ScdInstance { inner: src.realized() }));
        }
        Ok(())
    })
}

/// Solve the offline optimum exactly; fails with `Guard` on large instances.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn scd_solve_opt(inst: *const ScdInstance, out: *mut *mut ScdTrace) -> ScdStatus {
    guarded(|| {
        let inst = &ref_arg(inst, "inst")?.inner;
        let out = out_arg(out, "out")?;
        let sol = solve_opt(inst).map_err(fail)?;
        let trace = sol.schedule.to_trace(inst, "opt").map_err(fail)?;
        *out = Box::into_raw(Box::new(ScdTrace { inner: trace }));
        Ok(())
    })
}

/// Buying, delay (including penalties) and total cost. Any output may be null.
///
/// # Safety
/// `trace` must be a live handle; non-null outputs must be valid.
#[no_mangle]
pub unsafe extern "C" fn scd_trace_costs(
    trace: *const ScdTrace,
    buy: *mut f64,
    delay: *mut f64,
    total: *mut f64,
) -> ScdStatus {
    guarded(|| {
        let t = &ref_arg(trace, "trace")?.inner;
        if let Some(b) = buy.as_mut() {
            *b = t.cost_buy;
        }
        if let Some(d) = delay.as_mut() {
            *d = t.cost_delay;
        }
        if let Some(x) = total.as_mut() {
            *x = t.total();
        }
        Ok(())
    })
}

/// Serialize a trace; release the string with [`scd_string_free`].
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn scd_trace_to_json(trace: *const ScdTrace, out: *mut *mut c_char) -> ScdStatus {
    guarded(|| {
        let t = &ref_arg(trace, "trace")?.inner;
        let out = out_arg(out, "out")?;
        *out = CString::new(t.to_json()).expect("json has no nul bytes").into_raw();
        Ok(())
    })
}

/// `alg` total over `opt` total; `Violation` if the traces belong to different instances.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn scd_competitive_ratio(
    alg: *const ScdTrace,
    opt: *const ScdTrace,
    out: *mut f64,
) -> ScdStatus {
    guarded(|| {
        let alg = &ref_arg(alg, "alg")?.inner;
        let opt = &ref_arg(opt, "opt")?.inner;
        let out = out_arg(out, "out")?;
        *out = competitive_ratio(alg, opt).map_err(fail)?;
        Ok(())
    })
}

/// # Safety
/// `trace` must come from this library and not be used afterwards; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn scd_trace_free(trace: *mut ScdTrace) {
    if !trace.is_null() {
        drop(Box::from_raw(trace));
    }
}

/// # Safety
/// `s` must come from this library and not be used afterwards; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn scd_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Message of the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn scd_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}
