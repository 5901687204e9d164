//! C ABI over `dpoad`.
//!
//! Every fallible call returns a [`DpoadStatus`]. Results come back through
//! out-pointers, which are left untouched on failure. The message of the
//! last failure on the calling thread is available from
//! [`dpoad_last_error`]. Panics are caught at the boundary and reported as
//! [`DpoadStatus::Internal`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use dpoad::detector::{ks_statistic, utility_ratio_bound};
use dpoad::protocol::{session_round, Mechanism, Mssp, Owner, SessionConfig, SessionTrace};
use dpoad::sampler::{lambert_w_minus1, rho_star_learning};
use dpoad::{CountMatrix, Error, Phase};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DpoadStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// Argument outside the mathematical domain of the function.
    Domain = 3,
    /// Output buffer too short; the required length was written.
    BufferTooSmall = 4,
    Internal = 5,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DpoadMechanism {
    Laplace = 0,
    PainFree = 1,
    Dpoad = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DpoadPhase {
    Learning = 0,
    Prediction = 1,
}

/// Session parameters. Start from [`dpoad_config_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct DpoadConfig {
    pub mechanism: DpoadMechanism,
    pub epsilon: f64,
    pub gamma: f64,
    /// KS score above which a unit is flagged.
    pub threshold: f64,
    pub c_max: u64,
    pub bins: usize,
    pub unit_len: usize,
    pub seed: u64,
}

/// Owner and analyst sharing one layout, plus the trace so far.
pub struct DpoadSession {
    owner: Owner,
    mssp: Mssp,
    trace: SessionTrace,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn fail(status: DpoadStatus, msg: impl Into<String>) -> DpoadStatus {
    set_error(msg);
    status
}

fn from_error(err: Error) -> DpoadStatus {
    let status = match root(&err) {
        Error::LambertDomain(_) => DpoadStatus::Domain,
        _ => DpoadStatus::InvalidArgument,
    };
    fail(status, err.to_string())
}

fn root(err: &Error) -> &Error {
    match err {
        Error::AtIteration { source, .. } | Error::Context { source, .. } => root(source),
        e => e,
    }
}

fn guard(f: impl FnOnce() -> DpoadStatus) -> DpoadStatus {
    catch_unwind(AssertUnwindSafe(f))
        .unwrap_or_else(|_| fail(DpoadStatus::Internal, "panic inside dpoad"))
}

fn scalar(out: *mut f64, value: Result<f64, Error>) -> DpoadStatus {
    if out.is_null() {
        return fail(DpoadStatus::NullPointer, "out is null");
    }
    match value {
        Ok(v) => {
            // SAFETY: non-null, caller guarantees it points at a writable f64
            unsafe { *out = v };
            DpoadStatus::Ok
        }
        Err(e) => from_error(e),
    }
}

/// # Safety
/// `ptr` must be null or point at `len` readable values.
unsafe fn slice<'a, T>(ptr: *const T, len: usize) -> Option<&'a [T]> {
    if len == 0 {
        Some(&[])
    } else if ptr.is_null() {
        None
    } else {
        Some(std::slice::from_raw_parts(ptr, len))
    }
}

/// Static description of a status code. Never null, never freed.
#[no_mangle]
pub extern "C" fn dpoad_status_str(status: DpoadStatus) -> *const c_char {
    let s: &'static CStr = match status {
        DpoadStatus::Ok => c"ok",
        DpoadStatus::NullPointer => c"null pointer argument",
        DpoadStatus::InvalidArgument => c"invalid argument",
        DpoadStatus::Domain => c"argument outside the function domain",
        DpoadStatus::BufferTooSmall => c"output buffer too small",
        DpoadStatus::Internal => c"internal error",
    };
    s.as_ptr()
}

/// Message of the last failure on this thread, or null if there was none.
/// Valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn dpoad_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// # Safety
/// `out` must be null or point at a writable `DpoadConfig`.
#[no_mangle]
pub unsafe extern "C" fn dpoad_config_default(out: *mut DpoadConfig) -> DpoadStatus {
    if out.is_null() {
        return fail(DpoadStatus::NullPointer, "out is null");
    }
    let d = SessionConfig::default();
    *out = DpoadConfig {
        mechanism: DpoadMechanism::Dpoad,
        epsilon: d.epsilon,
        gamma: d.gamma,
        threshold: d.threshold,
        c_max: d.c_max,
        bins: d.bins,
        unit_len: d.unit_len,
        seed: d.seed,
    };
    DpoadStatus::Ok
}

/// Lower real branch of Lambert W on `[-1/e, 0)`.
///
/// # Safety
/// `out` must be null or point at a writable f64.
#[no_mangle]
pub unsafe extern "C" fn dpoad_lambert_w_minus1(x: f64, out: *mut f64) -> DpoadStatus {
    guard(|| scalar(out, lambert_w_minus1(x)))
}

/// Mismatch probability minimizing the learning-phase sample size.
///
/// # Safety
/// `out` must be null or point at a writable f64.
#[no_mangle]
pub unsafe extern "C" fn dpoad_rho_star_learning(gamma: f64, out: *mut f64) -> DpoadStatus {
    guard(|| scalar(out, rho_star_learning(gamma)))
}

/// # Safety
/// `out` must be null or point at a writable f64.
#[no_mangle]
pub unsafe extern "C" fn dpoad_utility_ratio_bound(
    epsilon: f64,
    m: u64,
    k: u64,
    out: *mut f64,
) -> DpoadStatus {
    guard(|| scalar(out, utility_ratio_bound(epsilon, m, k)))
}

/// Two-sample KS statistic.
///
/// # Safety
/// `a` and `b` must point at `a_len` and `b_len` readable doubles; `out`
/// must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn dpoad_ks_statistic(
    a: *const f64,
    a_len: usize,
    b: *const f64,
    b_len: usize,
    out: *mut f64,
) -> DpoadStatus {
    guard(|| {
        let (Some(a), Some(b)) = (slice(a, a_len), slice(b, b_len)) else {
            return fail(DpoadStatus::NullPointer, "sample pointer is null");
        };
        scalar(out, ks_statistic(a, b))
    })
}

/// Creates a session over attributes with the given value ranges. On
/// success `*out` owns the session; release it with [`dpoad_session_free`].
///
/// # Safety
/// `config` must be null or readable; `lo` and `hi` must point at
/// `n_attributes` doubles each; `out` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn dpoad_session_new(
    config: *const DpoadConfig,
    lo: *const f64,
    hi: *const f64,
    n_attributes: usize,
    out: *mut *mut DpoadSession,
) -> DpoadStatus {
    guard(|| {
        if config.is_null() || out.is_null() {
            return fail(DpoadStatus::NullPointer, "config or out is null");
        }
        let (Some(lo), Some(hi)) = (slice(lo, n_attributes), slice(hi, n_attributes)) else {
            return fail(DpoadStatus::NullPointer, "range pointer is null");
        };
        let c = &*config;
        let cfg = SessionConfig {
            mechanism: match c.mechanism {
                DpoadMechanism::Laplace => Mechanism::Laplace,
                DpoadMechanism::PainFree => Mechanism::PainFree,
                DpoadMechanism::Dpoad => Mechanism::Dpoad,
            },
            epsilon: c.epsilon,
            gamma: c.gamma,
            threshold: c.threshold,
            c_max: c.c_max,
            bins: c.bins,
            unit_len: c.unit_len,
            seed: c.seed,
            ..SessionConfig::default()
        };
        let built = (|| {
            let mut owner = Owner::new(cfg.clone())?;
            let mut mssp = Mssp::new(cfg)?;
            let ranges = lo.iter().copied().zip(hi.iter().copied()).collect();
            let layout = mssp.define_layout(&owner.metadata(ranges))?;
            owner.accept_layout(layout);
            Ok::<_, Error>(DpoadSession {
                owner,
                mssp,
                trace: SessionTrace {
                    entries: Vec::new(),
                    phase_switch_iter: None,
                },
            })
        })();
        match built {
            Ok(s) => {
                *out = Box::into_raw(Box::new(s));
                DpoadStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Runs one round on a row-major `rows x cols` count matrix.
///
/// # Safety
/// `session` must come from [`dpoad_session_new`]; `counts` must point at
/// `rows * cols` readable values.
#[no_mangle]
pub unsafe extern "C" fn dpoad_session_step_counts(
    session: *mut DpoadSession,
    counts: *const u64,
    rows: usize,
    cols: usize,
) -> DpoadStatus {
    guard(|| {
        let Some(s) = session.as_mut() else {
            return fail(DpoadStatus::NullPointer, "session is null");
        };
        let Some(len) = rows.checked_mul(cols) else {
            return fail(DpoadStatus::InvalidArgument, "rows * cols overflows");
        };
        let Some(flat) = slice(counts, len) else {
            return fail(DpoadStatus::NullPointer, "counts is null");
        };
        let matrix = CountMatrix::from_rows(flat.chunks(cols.max(1)).map(<[u64]>::to_vec).collect());
        let entry = matrix.and_then(|m| session_round(&mut s.owner, &mut s.mssp, m));
        match entry {
            Ok(e) => {
                s.trace.entries.push(e);
                s.trace.phase_switch_iter = s.mssp.switched_after();
                DpoadStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Copies the cumulative anomaly scores of the latest round into `out`.
/// `*len` always receives the score count; if it exceeds `capacity`
/// nothing is copied and `BufferTooSmall` is returned.
///
/// # Safety
/// `session` must come from [`dpoad_session_new`]; `out` must point at
/// `capacity` writable doubles; `len` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dpoad_session_scores(
    session: *const DpoadSession,
    out: *mut f64,
    capacity: usize,
    len: *mut usize,
) -> DpoadStatus {
    guard(|| {
        let (Some(s), false) = (session.as_ref(), len.is_null()) else {
            return fail(DpoadStatus::NullPointer, "session or len is null");
        };
        let scores: &[f64] = s
            .trace
            .entries
            .last()
            .map_or(&[], |e| &e.report.anomaly_scores);
        *len = scores.len();
        if scores.len() > capacity {
            return fail(DpoadStatus::BufferTooSmall, format!("need {} slots", scores.len()));
        }
        if !scores.is_empty() {
            if out.is_null() {
                return fail(DpoadStatus::NullPointer, "out is null");
            }
            ptr::copy_nonoverlapping(scores.as_ptr(), out, scores.len());
        }
        DpoadStatus::Ok
    })
}

/// Phase the owner will release in next.
///
/// # Safety
/// `session` must come from [`dpoad_session_new`]; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dpoad_session_phase(
    session: *const DpoadSession,
    out: *mut DpoadPhase,
) -> DpoadStatus {
    let (Some(s), false) = (session.as_ref(), out.is_null()) else {
        return fail(DpoadStatus::NullPointer, "session or out is null");
    };
    *out = match s.owner.phase() {
        Phase::Learning => DpoadPhase::Learning,
        Phase::Prediction => DpoadPhase::Prediction,
    };
    DpoadStatus::Ok
}

/// Text form of every message exchanged so far. Release the returned
/// string with [`dpoad_string_free`].
///
/// # Safety
/// `session` must come from [`dpoad_session_new`]; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dpoad_session_trace_text(
    session: *const DpoadSession,
    out: *mut *mut c_char,
) -> DpoadStatus {
    guard(|| {
        let (Some(s), false) = (session.as_ref(), out.is_null()) else {
            return fail(DpoadStatus::NullPointer, "session or out is null");
        };
        match CString::new(s.trace.to_text()) {
            Ok(text) => {
                *out = text.into_raw();
                DpoadStatus::Ok
            }
            Err(_) => fail(DpoadStatus::Internal, "trace contains a nul byte"),
        }
    })
}

/// # Safety
/// `s` must be null or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dpoad_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// # Safety
/// `session` must be null or come from [`dpoad_session_new`], not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dpoad_session_free(session: *mut DpoadSession) {
    if !session.is_null() {
        drop(Box::from_raw(session));
    }
}
