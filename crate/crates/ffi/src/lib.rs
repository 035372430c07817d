//! C ABI for the comcheck engine.
//!
//! Every function returns a [`ComcheckStatus`]; results go through out-pointers.
//! Objects are opaque handles released with their `_free` function. After a
//! non-OK status, `comcheck_last_error_message` describes the failure on the
//! calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use comcheck::cli::{self, ExitStatus, RunArtifacts};
use comcheck::diagnostics::Verdict;
use comcheck::mctdhb::{init_product_state, propagate, relax, InitialShape, MctdhbState, PropagateOptions, RelaxOptions};
use comcheck::model::{make_grid, HamiltonianSpec};
use comcheck::observables::{moments, natural_occupancies, total_energy};
use comcheck::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ComcheckStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    SchemaError = 3,
    PhysicsAbort = 4,
    Io = 5,
    BufferTooSmall = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ComcheckShape {
    Sech = 0,
    Gaussian = 1,
}

/// Recorded time-series column.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ComcheckColumn {
    Time = 0,
    Energy = 1,
    SigmaR2 = 2,
    SigmaN2 = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ComcheckVerdict {
    Converged = 0,
    Unconverged = 1,
    Inconclusive = 2,
}

/// Scalar observables of a state.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ComcheckObservables {
    pub time: f64,
    pub energy: f64,
    pub sigma_r2: f64,
    pub sigma_n2: f64,
}

/// Completed run with its artifacts on disk.
pub struct ComcheckRun {
    artifacts: RunArtifacts,
}

/// MCTDHB state together with a time-independent Hamiltonian.
pub struct ComcheckState {
    state: MctdhbState,
    spec: HamiltonianSpec,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let text = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(text));
}

struct Failure(ComcheckStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match cli::exit_status(&e) {
            ExitStatus::SchemaError => ComcheckStatus::SchemaError,
            ExitStatus::PhysicsAbort => ComcheckStatus::PhysicsAbort,
            _ if matches!(e, Error::Io { .. }) => ComcheckStatus::Io,
            _ => ComcheckStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(ComcheckStatus::NullPointer, format!("`{what}` is null"))
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(ComcheckStatus::InvalidArgument, msg.into())
}

/// Runs `body`, records any failure and converts panics into a status.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> ComcheckStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            ComcheckStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            ComcheckStatus::Panic
        }
    }
}

unsafe fn path_arg(p: *const c_char, what: &str) -> Result<PathBuf, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| invalid(format!("`{what}` is not valid UTF-8")))?;
    Ok(PathBuf::from(s))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn handle_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn fill(values: &[f64], buf: *mut f64, len: usize) -> Result<(), Failure> {
    if len < values.len() {
        return Err(Failure(
            ComcheckStatus::BufferTooSmall,
            format!("buffer holds {len} values, {} needed", values.len()),
        ));
    }
    if values.is_empty() {
        return Ok(());
    }
    if buf.is_null() {
        return Err(null("buf"));
    }
    ptr::copy_nonoverlapping(values.as_ptr(), buf, values.len());
    Ok(())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn comcheck_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Length in bytes of the last error message on this thread, without the terminator.
#[no_mangle]
pub extern "C" fn comcheck_last_error_length() -> usize {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(0, |s| s.as_bytes().len()))
}

/// Copies the last error message, NUL-terminated, into `buf` of capacity `len`.
///
/// # Safety
/// `buf` must point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn comcheck_last_error_message(buf: *mut c_char, len: usize) -> ComcheckStatus {
    if buf.is_null() {
        return ComcheckStatus::NullPointer;
    }
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let bytes = e.as_ref().map_or(&[0u8][..], |s| s.as_bytes_with_nul());
        if len < bytes.len() {
            return ComcheckStatus::BufferTooSmall;
        }
        ptr::copy_nonoverlapping(bytes.as_ptr().cast(), buf, bytes.len());
        ComcheckStatus::Ok
    })
}

/// Executes a configuration file; the handle stays valid until `comcheck_run_free`.
///
/// # Safety
/// `config` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn comcheck_run_config(config: *const c_char, out: *mut *mut ComcheckRun) -> ComcheckStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let path = path_arg(config, "config")?;
        let artifacts = cli::run_config(&path)?;
        *out = Box::into_raw(Box::new(ComcheckRun { artifacts }));
        Ok(())
    })
}

/// Process exit code the command-line tool would return for this run (0, 3 or 4).
///
/// # Safety
/// `run` must come from `comcheck_run_config`; `code` must be writable.
#[no_mangle]
pub unsafe extern "C" fn comcheck_run_exit_code(run: *const ComcheckRun, code: *mut i32) -> ComcheckStatus {
    guard(|| {
        *out_arg(code, "code")? = handle(run, "run")?.artifacts.exit_status().code();
        Ok(())
    })
}

/// Number of recorded time points.
///
/// # Safety
/// `run` must come from `comcheck_run_config`; `count` must be writable.
#[no_mangle]
pub unsafe extern "C" fn comcheck_run_record_count(run: *const ComcheckRun, count: *mut usize) -> ComcheckStatus {
    guard(|| {
        *out_arg(count, "count")? = handle(run, "run")?.artifacts.series.len();
        Ok(())
    })
}

/// Copies one recorded column into `buf` of capacity `len`.
///
/// # Safety
/// `run` must come from `comcheck_run_config`; `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn comcheck_run_series(
    run: *const ComcheckRun,
    column: ComcheckColumn,
    buf: *mut f64,
    len: usize,
) -> ComcheckStatus {
    guard(|| {
        let s = &handle(run, "run")?.artifacts.series;
        let values = match column {
            ComcheckColumn::Time => &s.times,
            ComcheckColumn::Energy => &s.energy,
            ComcheckColumn::SigmaR2 => &s.sigma_r2,
            ComcheckColumn::SigmaN2 => &s.sigma_n2,
        };
        fill(values, buf, len)
    })
}

/// # Safety
/// `run` must come from `comcheck_run_config` and not be used afterwards; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn comcheck_run_free(run: *mut ComcheckRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// Product state `|N, 0, ..., 0>` on a centered grid, paired with the
/// stationary Hamiltonian of trap frequency `omega` and coupling `g`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn comcheck_state_new_product(
    particles: usize,
    modes: usize,
    length: f64,
    points: usize,
    width: f64,
    shape: ComcheckShape,
    omega: f64,
    g: f64,
    out: *mut *mut ComcheckState,
) -> ComcheckStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        if !(omega >= 0.0) || !omega.is_finite() || !g.is_finite() {
            return Err(invalid(format!("need finite omega >= 0 and finite g, got {omega}, {g}")));
        }
        let grid = make_grid(length, points, 0.0)?;
        let shape = match shape {
            ComcheckShape::Sech => InitialShape::Sech,
            ComcheckShape::Gaussian => InitialShape::Gaussian,
        };
        let state = init_product_state(&shape, particles, modes, &grid, width)?;
        let spec = HamiltonianSpec::stationary(omega, g);
        *out = Box::into_raw(Box::new(ComcheckState { state, spec }));
        Ok(())
    })
}

/// Imaginary-time relaxation in place; writes the converged energy.
///
/// # Safety
/// `state` must come from `comcheck_state_new_product`; `energy` may be null.
#[no_mangle]
pub unsafe extern "C" fn comcheck_state_relax(
    state: *mut ComcheckState,
    dtau: f64,
    tolerance: f64,
    energy: *mut f64,
) -> ComcheckStatus {
    guard(|| {
        let s = handle_mut(state, "state")?;
        let opts = RelaxOptions {
            dtau,
            tolerance,
            ..RelaxOptions::default()
        };
        let res = relax(&s.state, &s.spec, &opts)?;
        s.state = res.state;
        if let Some(e) = energy.as_mut() {
            *e = res.energy;
        }
        Ok(())
    })
}

/// Real-time propagation in place up to `t_final` with fixed step `dt`.
///
/// # Safety
/// `state` must come from `comcheck_state_new_product`.
#[no_mangle]
pub unsafe extern "C" fn comcheck_state_propagate(state: *mut ComcheckState, t_final: f64, dt: f64) -> ComcheckStatus {
    guard(|| {
        let s = handle_mut(state, "state")?;
        if !(t_final > s.state.t) {
            return Err(invalid(format!("t_final {t_final} is not after the current time {}", s.state.t)));
        }
        let steps = ((t_final - s.state.t) / dt).round().max(1.0) as usize;
        let res = propagate(&s.state, &s.spec, &PropagateOptions::new(t_final, dt, steps))?;
        s.state = res.state;
        Ok(())
    })
}

/// # Safety
/// `state` must come from `comcheck_state_new_product`; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn comcheck_state_observables(
    state: *const ComcheckState,
    out: *mut ComcheckObservables,
) -> ComcheckStatus {
    guard(|| {
        let s = handle(state, "state")?;
        let out = out_arg(out, "out")?;
        let m = moments(&s.state)?;
        *out = ComcheckObservables {
            time: s.state.t,
            energy: total_energy(&s.state, &s.spec, s.state.t)?,
            sigma_r2: m.com_variance,
            sigma_n2: m.density_variance,
        };
        Ok(())
    })
}

/// Number of orbitals M.
///
/// # Safety
/// `state` must come from `comcheck_state_new_product`; `modes` must be writable.
#[no_mangle]
pub unsafe extern "C" fn comcheck_state_modes(state: *const ComcheckState, modes: *mut usize) -> ComcheckStatus {
    guard(|| {
        *out_arg(modes, "modes")? = handle(state, "state")?.state.modes();
        Ok(())
    })
}

/// Natural occupation numbers, descending, into `buf` of capacity `len` (at least M).
///
/// # Safety
/// `state` must come from `comcheck_state_new_product`; `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn comcheck_state_occupations(
    state: *const ComcheckState,
    buf: *mut f64,
    len: usize,
) -> ComcheckStatus {
    guard(|| {
        let occ = natural_occupancies(&handle(state, "state")?.state)?.occupations;
        fill(&occ, buf, len)
    })
}

/// # Safety
/// `state` must come from `comcheck_state_new_product` and not be used afterwards; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn comcheck_state_free(state: *mut ComcheckState) {
    if !state.is_null() {
        drop(Box::from_raw(state));
    }
}

/// Exact ground-state energy of two trapped bosons in units of the trap quantum.
///
/// # Safety
/// `energy` must be writable.
#[no_mangle]
pub unsafe extern "C" fn comcheck_exact_energy(g: f64, energy: *mut f64) -> ComcheckStatus {
    guard(|| {
        *out_arg(energy, "energy")? = comcheck::exact2::solve_nu(g)? + 1.0;
        Ok(())
    })
}

/// COM-variance test of run `a` against reference `b` (run directories or
/// time-series CSV files).
///
/// # Safety
/// `a` and `b` must be NUL-terminated strings; `verdict` and `metric` must be writable.
#[no_mangle]
pub unsafe extern "C" fn comcheck_compare(
    a: *const c_char,
    b: *const c_char,
    tolerance: f64,
    verdict: *mut ComcheckVerdict,
    metric: *mut f64,
) -> ComcheckStatus {
    guard(|| {
        let (a, b) = (path_arg(a, "a")?, path_arg(b, "b")?);
        let verdict = out_arg(verdict, "verdict")?;
        let metric = out_arg(metric, "metric")?;
        let report = cli::compare(&a, &b, tolerance, None)?.report;
        *verdict = match report.verdict {
            Verdict::Converged => ComcheckVerdict::Converged,
            Verdict::Unconverged => ComcheckVerdict::Unconverged,
            Verdict::Inconclusive => ComcheckVerdict::Inconclusive,
        };
        *metric = report.metric;
        Ok(())
    })
}
