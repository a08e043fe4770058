//! C interface to the blowup profile solver.
//!
//! Every function returns a [`BlowupStatus`]; on failure a message is kept
//! per thread and can be read with [`blowup_last_error_message`]. Handles are
//! opaque and must be released with the matching `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use blowup::asymptotics::scaling_predictions;
use blowup::diagnostics::discriminant_check;
use blowup::integrate::Tolerances;
use blowup::shoot::{Shooter, ShootingResult};
use blowup::{Error, ModelParams};

/// Result code of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlowupStatus {
    Ok = 0,
    NullPointer = 1,
    Domain = 2,
    SingularPoint = 3,
    Range = 4,
    Integration = 5,
    SearchFailure = 6,
    Diagnostic = 7,
    InsufficientData = 8,
    Degenerate = 9,
    Monotonicity = 10,
    OutOfRange = 11,
    Panic = 12,
}

/// Model constants for one exponent.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlowupConstants {
    pub p: u32,
    pub alpha: f64,
    pub b0: f64,
    pub b_inf: f64,
    pub omega: f64,
    pub experimental: bool,
}

/// Summary of a solution handle.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlowupSolutionInfo {
    pub n: usize,
    pub c_n: f64,
    pub b_n: f64,
    pub mismatch: f64,
    pub zeros: usize,
    pub rho_min: f64,
    pub rho_max: f64,
}

/// Opaque model parameters.
pub struct BlowupParams {
    inner: ModelParams,
}

/// Opaque refined profile.
pub struct BlowupSolution {
    inner: ShootingResult,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn status_of(err: &Error) -> BlowupStatus {
    match err {
        Error::Domain(_) => BlowupStatus::Domain,
        Error::SingularPoint { .. } => BlowupStatus::SingularPoint,
        Error::Range { .. } => BlowupStatus::Range,
        Error::Integration { .. } => BlowupStatus::Integration,
        Error::SearchFailure { .. } => BlowupStatus::SearchFailure,
        Error::Diagnostic(_) => BlowupStatus::Diagnostic,
        Error::InsufficientData { .. } => BlowupStatus::InsufficientData,
        Error::Degenerate { .. } => BlowupStatus::Degenerate,
        Error::Monotonicity { .. } => BlowupStatus::Monotonicity,
    }
}

/// Runs `f`, records its error message and converts panics.
fn guard(f: impl FnOnce() -> Result<(), (BlowupStatus, String)>) -> BlowupStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => BlowupStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside the solver".into());
            BlowupStatus::Panic
        }
    }
}

fn lift(err: Error) -> (BlowupStatus, String) {
    (status_of(&err), err.to_string())
}

fn null(what: &str) -> (BlowupStatus, String) {
    (BlowupStatus::NullPointer, format!("{what} is null"))
}

/// Creates parameters for exponent `p` (an integer >= 6).
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle pointer.
#[no_mangle]
pub unsafe extern "C" fn blowup_params_new(p: u32, out: *mut *mut BlowupParams) -> BlowupStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let inner = ModelParams::new(p).map_err(lift)?;
        *out = Box::into_raw(Box::new(BlowupParams { inner }));
        Ok(())
    })
}

/// Releases a parameter handle. Null is ignored.
///
/// # Safety
/// `params` must come from [`blowup_params_new`] and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn blowup_params_free(params: *mut BlowupParams) {
    if !params.is_null() {
        drop(Box::from_raw(params));
    }
}

/// Copies the closed-form constants into `out`.
///
/// # Safety
/// `params` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn blowup_params_constants(
    params: *const BlowupParams,
    out: *mut BlowupConstants,
) -> BlowupStatus {
    guard(|| {
        let m = params.as_ref().ok_or_else(|| null("params"))?.inner;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = BlowupConstants {
            p: m.p,
            alpha: m.alpha,
            b0: m.b0,
            b_inf: m.b_inf,
            omega: m.omega,
            experimental: m.experimental,
        };
        Ok(())
    })
}

/// Predicted limits of `c_{n+1}/c_n` and `(b_{n+1}-b_inf)/(b_inf-b_n)`.
///
/// # Safety
/// `params` must be a live handle; `ratio_c` and `ratio_b` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn blowup_scaling(
    params: *const BlowupParams,
    ratio_c: *mut f64,
    ratio_b: *mut f64,
) -> BlowupStatus {
    guard(|| {
        let m = &params.as_ref().ok_or_else(|| null("params"))?.inner;
        if ratio_c.is_null() || ratio_b.is_null() {
            return Err(null("output pointer"));
        }
        let (rc, rb) = scaling_predictions(m);
        *ratio_c = rc;
        *ratio_b = rb;
        Ok(())
    })
}

/// `(p-1)^2 Δ(1 - 2α)`, negative for every admissible `p`.
///
/// # Safety
/// `params` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn blowup_discriminant(
    params: *const BlowupParams,
    out: *mut f64,
) -> BlowupStatus {
    guard(|| {
        let m = &params.as_ref().ok_or_else(|| null("params"))?.inner;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = discriminant_check(m).map_err(lift)?;
        Ok(())
    })
}

/// Solves for the profile `u_n` (`n >= 1`). Pass `rho_mid <= 0` for the
/// default matching point and `rtol <= 0` or `atol <= 0` for the default
/// tolerances.
///
/// # Safety
/// `params` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn blowup_find_solution(
    params: *const BlowupParams,
    n: usize,
    rho_mid: f64,
    rtol: f64,
    atol: f64,
    out: *mut *mut BlowupSolution,
) -> BlowupStatus {
    guard(|| {
        let m = &params.as_ref().ok_or_else(|| null("params"))?.inner;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let d = Tolerances::default();
        let tol = Tolerances::new(
            if rtol > 0.0 { rtol } else { d.rtol },
            if atol > 0.0 { atol } else { d.atol },
        )
        .map_err(lift)?;
        let rho_mid = if rho_mid > 0.0 {
            rho_mid
        } else {
            blowup::shoot::DEFAULT_RHO_MID
        };
        let inner = Shooter::new(m, rho_mid, tol)
            .and_then(|sh| sh.find_solution(n))
            .map_err(lift)?;
        *out = Box::into_raw(Box::new(BlowupSolution { inner }));
        Ok(())
    })
}

/// Releases a solution handle. Null is ignored.
///
/// # Safety
/// `sol` must come from [`blowup_find_solution`] and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn blowup_solution_free(sol: *mut BlowupSolution) {
    if !sol.is_null() {
        drop(Box::from_raw(sol));
    }
}

/// Copies the shooting parameters and covered range of `sol`.
///
/// # Safety
/// `sol` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn blowup_solution_info(
    sol: *const BlowupSolution,
    out: *mut BlowupSolutionInfo,
) -> BlowupStatus {
    guard(|| {
        let s = &sol.as_ref().ok_or_else(|| null("solution"))?.inner;
        if out.is_null() {
            return Err(null("out"));
        }
        let (rho_min, rho_max) = s.trajectory.rho_range();
        *out = BlowupSolutionInfo {
            n: s.n,
            c_n: s.c_n,
            b_n: s.b_n,
            mismatch: s.mismatch,
            zeros: s.zeros,
            rho_min,
            rho_max,
        };
        Ok(())
    })
}

/// Evaluates `u` and `u'` of the profile at `rho`.
///
/// # Safety
/// `sol` must be a live handle; `u` and `du` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn blowup_solution_eval(
    sol: *const BlowupSolution,
    rho: f64,
    u: *mut f64,
    du: *mut f64,
) -> BlowupStatus {
    guard(|| {
        let s = &sol.as_ref().ok_or_else(|| null("solution"))?.inner;
        if u.is_null() || du.is_null() {
            return Err(null("output pointer"));
        }
        let (lo, hi) = s.trajectory.rho_range();
        let st = s.trajectory.eval(rho).ok_or_else(|| {
            (
                BlowupStatus::OutOfRange,
                format!("rho = {rho} outside [{lo}, {hi}]"),
            )
        })?;
        *u = st.u;
        *du = st.du;
        Ok(())
    })
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length without the NUL, or
/// 0 when there is no error.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes of writes.
#[no_mangle]
pub unsafe extern "C" fn blowup_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else { return 0 };
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn blowup_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}
