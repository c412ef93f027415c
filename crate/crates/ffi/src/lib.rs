//! C ABI over `colearn`.
//!
//! Objects cross the boundary as opaque handles created by a `*_new`
//! function and released with the matching `*_free`. Every fallible call
//! returns a [`ColearnStatus`]; on failure a message is kept per thread and
//! can be read with [`colearn_last_error_message`]. Panics are caught and
//! reported as [`ColearnStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use colearn::coordinator::bounds::{batch_bound, iol_bound, ocp_bound, required_batch};
use colearn::harness::{evaluate_bounds, run_traces, RunConfig, RunTrace};
use colearn::hemiproj::{floyd_warshall_clip, hemimetric_project, hemimetric_project_partial, HemimetricInstance};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ColearnStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    InvalidConfig = 4,
    /// The simulation has not been run yet.
    NotRun = 5,
    Panic = 6,
}

/// r-bounded hemimetrics on `n` items.
pub struct ColearnHemimetric {
    inst: HemimetricInstance,
}

/// A run configuration and, once run, its traces.
pub struct ColearnSimulation {
    config: RunConfig,
    traces: Option<Vec<RunTrace>>,
}

/// Certificate returned with a projection.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ColearnProjectionInfo {
    /// Weighted squared distance of the output from the input.
    pub primal: f64,
    /// Lower bound on the optimal distance.
    pub dual: f64,
    pub gap: f64,
    pub sweeps: usize,
    /// The sweep cap was hit before the gap target.
    pub capped: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

struct Failure(ColearnStatus, String);

impl From<colearn::Error> for Failure {
    fn from(e: colearn::Error) -> Self {
        let status = match e {
            colearn::Error::DimensionMismatch { .. } => ColearnStatus::DimensionMismatch,
            colearn::Error::InvalidConfig(_)
            | colearn::Error::Json(_)
            | colearn::Error::TaskOutOfRange { .. }
            | colearn::Error::TraceExhausted(_) => ColearnStatus::InvalidConfig,
            _ => ColearnStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(ColearnStatus::NullPointer, format!("`{what}` is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> ColearnStatus {
    let (status, message) = match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => (ColearnStatus::Ok, String::new()),
        Ok(Err(Failure(status, message))) => (status, message),
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            (ColearnStatus::Panic, message)
        }
    };
    if status != ColearnStatus::Ok {
        LAST_ERROR.with(|e| *e.borrow_mut() = message);
    }
    status
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a>(p: *mut f64, len: usize, what: &str) -> Result<&'a mut [f64], Failure> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn write<T>(out: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

fn check_len(expected: usize, actual: usize) -> Result<(), Failure> {
    if expected == actual {
        Ok(())
    } else {
        Err(colearn::Error::DimensionMismatch { expected, actual }.into())
    }
}

/// Copies the calling thread's last error message into `buf` as a
/// NUL-terminated string, truncating to `len − 1` bytes. Returns the full
/// message length in bytes, excluding the terminator, so a call with
/// `len = 0` sizes the buffer.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn colearn_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Creates the hemimetric structure on `n ≥ 2` items with entries in `[0, r]`.
///
/// # Safety
/// `out` must be valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn colearn_hemimetric_new(n: usize, r: f64, out: *mut *mut ColearnHemimetric) -> ColearnStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let inst = HemimetricInstance::new(n, r)?;
        *out = Box::into_raw(Box::new(ColearnHemimetric { inst }));
        Ok(())
    })
}

/// Releases a handle from [`colearn_hemimetric_new`]. Null is ignored.
///
/// # Safety
/// `h` must be null or a live handle, and is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn colearn_hemimetric_free(h: *mut ColearnHemimetric) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Number of ordered pairs, `n·(n − 1)`; 0 for a null handle.
///
/// # Safety
/// `h` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn colearn_hemimetric_len(h: *const ColearnHemimetric) -> usize {
    h.as_ref().map_or(0, |h| h.inst.len())
}

/// Position of the zero-based ordered pair `(i, j)`, `i ≠ j`, in the vectors
/// passed to the other hemimetric calls.
///
/// # Safety
/// `h` must be a live handle and `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn colearn_hemimetric_pair_index(
    h: *const ColearnHemimetric,
    i: usize,
    j: usize,
    out: *mut usize,
) -> ColearnStatus {
    guard(|| {
        let h = h.as_ref().ok_or_else(|| null("h"))?;
        let n = h.inst.items();
        if i >= n || j >= n || i == j {
            return Err(Failure(
                ColearnStatus::InvalidArgument,
                format!("({i}, {j}) is not an ordered pair of distinct items below {n}"),
            ));
        }
        write(out, h.inst.pairs().index(i, j), "out")
    })
}

/// Projects `d` onto the structure under the weighted distance
/// `Σ q (x − d)²`, stopping once the duality gap is at most `delta`.
/// `q = NULL` means unit weights; zero weights are allowed and leave their
/// pairs to be filled feasibly. `d`, `q` and `out` have `len` entries and
/// `out` may alias `d`. `info` may be null.
///
/// # Safety
/// Pointers must be valid for `len` elements (or null where allowed).
#[no_mangle]
pub unsafe extern "C" fn colearn_hemimetric_project(
    h: *const ColearnHemimetric,
    d: *const f64,
    q: *const f64,
    len: usize,
    delta: f64,
    out: *mut f64,
    info: *mut ColearnProjectionInfo,
) -> ColearnStatus {
    guard(|| {
        let h = h.as_ref().ok_or_else(|| null("h"))?;
        check_len(h.inst.len(), len)?;
        let d = slice(d, len, "d")?.to_vec();
        let q = if q.is_null() { vec![1.0; len] } else { slice(q, len, "q")?.to_vec() };
        let res = if q.iter().all(|&w| w > 0.0) {
            hemimetric_project(&d, &q, &h.inst, delta)?
        } else {
            hemimetric_project_partial(&d, &q, &h.inst, delta)?
        };
        slice_mut(out, len, "out")?.copy_from_slice(&res.d);
        if !info.is_null() {
            info.write(ColearnProjectionInfo {
                primal: res.primal,
                dual: res.dual,
                gap: res.gap,
                sweeps: res.sweeps,
                capped: res.capped,
            });
        }
        Ok(())
    })
}

/// Downward repair of `d` into the structure by shortest-path relaxation and
/// clipping. `out` may alias `d`.
///
/// # Safety
/// `d` and `out` must be valid for `len` elements.
#[no_mangle]
pub unsafe extern "C" fn colearn_hemimetric_repair(
    h: *const ColearnHemimetric,
    d: *const f64,
    len: usize,
    out: *mut f64,
) -> ColearnStatus {
    guard(|| {
        let h = h.as_ref().ok_or_else(|| null("h"))?;
        check_len(h.inst.len(), len)?;
        let repaired = floyd_warshall_clip(slice(d, len, "d")?, &h.inst);
        slice_mut(out, len, "out")?.copy_from_slice(&repaired);
        Ok(())
    })
}

/// Creates a simulation from a JSON configuration; absent fields, or a null
/// `config_json`, take the defaults.
///
/// # Safety
/// `config_json` must be null or a NUL-terminated string; `out` must be
/// valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn colearn_simulation_new(
    config_json: *const c_char,
    out: *mut *mut ColearnSimulation,
) -> ColearnStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let config = if config_json.is_null() {
            RunConfig::default()
        } else {
            let text = CStr::from_ptr(config_json)
                .to_str()
                .map_err(|e| Failure(ColearnStatus::InvalidArgument, format!("configuration is not UTF-8: {e}")))?;
            RunConfig::from_json_str(text)?
        };
        *out = Box::into_raw(Box::new(ColearnSimulation { config, traces: None }));
        Ok(())
    })
}

/// Releases a handle from [`colearn_simulation_new`]. Null is ignored.
///
/// # Safety
/// `s` must be null or a live handle, and is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn colearn_simulation_free(s: *mut ColearnSimulation) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Runs every configured run, replacing earlier results.
///
/// # Safety
/// `s` must be a live handle not used concurrently.
#[no_mangle]
pub unsafe extern "C" fn colearn_simulation_run(s: *mut ColearnSimulation) -> ColearnStatus {
    guard(|| {
        let s = s.as_mut().ok_or_else(|| null("s"))?;
        s.traces = Some(run_traces(&s.config)?);
        Ok(())
    })
}

fn traces(s: &ColearnSimulation) -> Result<&[RunTrace], Failure> {
    s.traces
        .as_deref()
        .ok_or_else(|| Failure(ColearnStatus::NotRun, "simulation has not been run".into()))
}

fn trace(s: &ColearnSimulation, run: usize) -> Result<&RunTrace, Failure> {
    let all = traces(s)?;
    all.get(run).ok_or_else(|| {
        Failure(
            ColearnStatus::InvalidArgument,
            format!("run {run} out of range for {} runs", all.len()),
        )
    })
}

/// Writes the configured run count and steps per run.
///
/// # Safety
/// `s` must be a live handle; `runs` and `steps` may be null.
#[no_mangle]
pub unsafe extern "C" fn colearn_simulation_shape(
    s: *const ColearnSimulation,
    runs: *mut usize,
    steps: *mut usize,
) -> ColearnStatus {
    guard(|| {
        let s = s.as_ref().ok_or_else(|| null("s"))?;
        if !runs.is_null() {
            runs.write(s.config.runs);
        }
        if !steps.is_null() {
            steps.write(s.config.steps);
        }
        Ok(())
    })
}

/// Final cumulative regret of one run.
///
/// # Safety
/// `s` must be a live handle and `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn colearn_simulation_final_regret(
    s: *const ColearnSimulation,
    run: usize,
    out: *mut f64,
) -> ColearnStatus {
    guard(|| {
        let s = s.as_ref().ok_or_else(|| null("s"))?;
        write(out, trace(s, run)?.final_regret(), "out")
    })
}

/// Cumulative regret after every step of one run; `out` holds `len` =
/// steps entries.
///
/// # Safety
/// `s` must be a live handle and `out` valid for `len` elements.
#[no_mangle]
pub unsafe extern "C" fn colearn_simulation_cumulative_regret(
    s: *const ColearnSimulation,
    run: usize,
    out: *mut f64,
    len: usize,
) -> ColearnStatus {
    guard(|| {
        let s = s.as_ref().ok_or_else(|| null("s"))?;
        let t = trace(s, run)?;
        check_len(t.records.len(), len)?;
        for (o, r) in slice_mut(out, len, "out")?.iter_mut().zip(&t.records) {
            *o = r.cum_regret;
        }
        Ok(())
    })
}

/// Number of runs whose regret exceeds an applicable closed-form bound.
///
/// # Safety
/// `s` must be a live handle and `violations` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn colearn_simulation_bound_violations(
    s: *const ColearnSimulation,
    violations: *mut usize,
) -> ColearnStatus {
    guard(|| {
        let s = s.as_ref().ok_or_else(|| null("s"))?;
        let reports = evaluate_bounds(&s.config, traces(s)?)?;
        write(violations, reports.iter().filter(|r| !r.pass).count(), "violations")
    })
}

/// `(3/2)√T·S·G`, the single-learner bound.
#[no_mangle]
pub extern "C" fn colearn_ocp_bound(t: usize, s_max: f64, g_max: f64) -> f64 {
    ocp_bound(t, s_max, g_max)
}

/// `(3/2)√(TK)·S·G`, the bound for `K` independent learners.
#[no_mangle]
pub extern "C" fn colearn_iol_bound(t: usize, k: usize, s_max: f64, g_max: f64) -> f64 {
    iol_bound(t, k, s_max, g_max)
}

/// Smallest batch length for the batch bound with insensitivity `eps`.
#[no_mangle]
pub extern "C" fn colearn_required_batch(s_max: f64, eps: f64) -> usize {
    required_batch(s_max, eps)
}

/// `(3/2)√B·S·G`.
#[no_mangle]
pub extern "C" fn colearn_batch_bound(b: usize, s_max: f64, g_max: f64) -> f64 {
    batch_bound(b, s_max, g_max)
}
