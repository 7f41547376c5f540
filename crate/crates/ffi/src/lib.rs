//! C ABI over `egaa-core`.
//!
//! Every function returns an [`EgaaStatus`]; on failure a message is available
//! from [`egaa_last_error_message`] until the next call on the same thread.
//! Handles are opaque and must be released with their `_free` function.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;
use std::sync::Arc;

use egaa_core::mixing::{effective_mass, gamma_to_theta, theta_to_gamma, MomentumCoefficients};
use egaa_core::optimizers::{
    energy_guard, enforce_mass_bounds, run, write_trace_csv, OptimizerConfig, RunStatus, RunTrace,
};
use egaa_core::problems::{Oracle, ProblemConfig};
use egaa_core::Error;
use nalgebra::DVector;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EgaaStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Parse = 3,
    Io = 4,
    Internal = 5,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EgaaRunStatus {
    Converged = 0,
    MaxIterations = 1,
    Diverged = 2,
}

/// One trace row. Diagnostic fields are NaN when `has_diagnostics` is 0.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct EgaaRecord {
    pub k: usize,
    pub f_value: f64,
    pub grad_norm: f64,
    pub has_diagnostics: u8,
    pub effective_mass: f64,
    pub delta_mass: f64,
    pub rho: f64,
    pub damping: f64,
    pub gain: f64,
    pub consistency_sum: f64,
}

pub struct EgaaProblem {
    oracle: Arc<dyn Oracle>,
}

pub struct EgaaRun {
    trace: RunTrace,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(EgaaStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::Io { .. } | Error::Csv { .. } => EgaaStatus::Io,
            Error::Json { .. } | Error::Malformed { .. } => EgaaStatus::Parse,
            _ => EgaaStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

fn fail(status: EgaaStatus, msg: impl Into<String>) -> Failure {
    Failure(status, msg.into())
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn guarded(f: impl FnOnce() -> Result<(), Failure>) -> EgaaStatus {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => EgaaStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            EgaaStatus::Internal
        }
    }
}

unsafe fn non_null<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref()
        .ok_or_else(|| fail(EgaaStatus::NullPointer, format!("`{name}` is null")))
}

unsafe fn c_str<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(fail(EgaaStatus::NullPointer, format!("`{name}` is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(EgaaStatus::InvalidArgument, format!("`{name}` is not UTF-8")))
}

unsafe fn slice<'a>(p: *const f64, len: usize, name: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(fail(EgaaStatus::NullPointer, format!("`{name}` is null")));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a>(p: *mut f64, len: usize, name: &str) -> Result<&'a mut [f64], Failure> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(fail(EgaaStatus::NullPointer, format!("`{name}` is null")));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn write_out<T>(out: *mut T, value: T, name: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(fail(EgaaStatus::NullPointer, format!("`{name}` is null")));
    }
    out.write(value);
    Ok(())
}

fn parse_json<T: serde::de::DeserializeOwned>(text: &str, what: &str) -> Result<T, Failure> {
    serde_json::from_str(text).map_err(|e| fail(EgaaStatus::Parse, format!("{what}: {e}")))
}

/// Message for the last failed call on this thread, or null. Owned by the library.
#[no_mangle]
pub extern "C" fn egaa_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Build a problem from its JSON description.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn egaa_problem_from_json(json: *const c_char, out: *mut *mut EgaaProblem) -> EgaaStatus {
    guarded(|| {
        let cfg: ProblemConfig = parse_json(c_str(json, "json")?, "problem")?;
        let oracle = cfg.build()?;
        write_out(out, Box::into_raw(Box::new(EgaaProblem { oracle })), "out")
    })
}

/// # Safety
/// `problem` must come from `egaa_problem_from_json` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn egaa_problem_free(problem: *mut EgaaProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// # Safety
/// `problem` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn egaa_problem_dim(problem: *const EgaaProblem, out: *mut usize) -> EgaaStatus {
    guarded(|| write_out(out, non_null(problem, "problem")?.oracle.dim(), "out"))
}

fn point(problem: &EgaaProblem, x: &[f64]) -> Result<DVector<f64>, Failure> {
    let n = problem.oracle.dim();
    if x.len() != n {
        return Err(fail(
            EgaaStatus::InvalidArgument,
            format!("expected {n} coordinates, got {}", x.len()),
        ));
    }
    Ok(DVector::from_column_slice(x))
}

/// # Safety
/// `x` must hold `n` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn egaa_problem_value(
    problem: *const EgaaProblem,
    x: *const f64,
    n: usize,
    out: *mut f64,
) -> EgaaStatus {
    guarded(|| {
        let p = non_null(problem, "problem")?;
        let x = point(p, slice(x, n, "x")?)?;
        write_out(out, p.oracle.value(&x), "out")
    })
}

/// # Safety
/// `x` and `grad` must each hold `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn egaa_problem_gradient(
    problem: *const EgaaProblem,
    x: *const f64,
    n: usize,
    grad: *mut f64,
) -> EgaaStatus {
    guarded(|| {
        let p = non_null(problem, "problem")?;
        let x = point(p, slice(x, n, "x")?)?;
        let g = p.oracle.gradient(&x);
        slice_mut(grad, n, "grad")?.copy_from_slice(g.as_slice());
        Ok(())
    })
}

/// Run an optimizer configured by JSON from `x0`.
///
/// # Safety
/// `config_json` must be NUL-terminated, `x0` must hold `n` doubles and `out`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn egaa_run(
    problem: *const EgaaProblem,
    config_json: *const c_char,
    x0: *const f64,
    n: usize,
    out: *mut *mut EgaaRun,
) -> EgaaStatus {
    guarded(|| {
        let p = non_null(problem, "problem")?;
        let cfg: OptimizerConfig = parse_json(c_str(config_json, "config_json")?, "optimizer config")?;
        let x0 = point(p, slice(x0, n, "x0")?)?;
        let trace = run(p.oracle.as_ref(), &cfg, &x0)?;
        write_out(out, Box::into_raw(Box::new(EgaaRun { trace })), "out")
    })
}

/// # Safety
/// `run` must come from `egaa_run` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn egaa_run_free(run: *mut EgaaRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// # Safety
/// `run` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn egaa_run_status(run: *const EgaaRun, out: *mut EgaaRunStatus) -> EgaaStatus {
    guarded(|| {
        let status = match non_null(run, "run")?.trace.status {
            RunStatus::Converged => EgaaRunStatus::Converged,
            RunStatus::MaxIterations => EgaaRunStatus::MaxIterations,
            RunStatus::Diverged => EgaaRunStatus::Diverged,
        };
        write_out(out, status, "out")
    })
}

/// Number of records (iterations taken).
///
/// # Safety
/// `run` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn egaa_run_len(run: *const EgaaRun, out: *mut usize) -> EgaaStatus {
    guarded(|| write_out(out, non_null(run, "run")?.trace.records.len(), "out"))
}

/// Record `index` (0-based; its `k` is `index + 1`).
///
/// # Safety
/// `run` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn egaa_run_record(run: *const EgaaRun, index: usize, out: *mut EgaaRecord) -> EgaaStatus {
    guarded(|| {
        let trace = &non_null(run, "run")?.trace;
        let rec = trace
            .records
            .get(index)
            .ok_or_else(|| fail(EgaaStatus::InvalidArgument, format!("record {index} out of range")))?;
        let d = rec.diagnostics;
        let pick = |f: fn(&egaa_core::mixing::StepDiagnostics) -> f64| d.as_ref().map_or(f64::NAN, f);
        let record = EgaaRecord {
            k: rec.k,
            f_value: rec.f_value,
            grad_norm: rec.grad_norm,
            has_diagnostics: d.is_some() as u8,
            effective_mass: pick(|d| d.effective_mass),
            delta_mass: pick(|d| d.delta_mass),
            rho: pick(|d| d.guard_rho),
            damping: pick(|d| d.damping),
            gain: pick(|d| d.gain),
            consistency_sum: pick(|d| d.consistency_sum),
        };
        write_out(out, record, "out")
    })
}

/// Copy the last finite iterate into `x` (`n` doubles).
///
/// # Safety
/// `run` must be a live handle; `x` must hold `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn egaa_run_final_x(run: *const EgaaRun, x: *mut f64, n: usize) -> EgaaStatus {
    guarded(|| {
        let fx = &non_null(run, "run")?.trace.final_x;
        if fx.len() != n {
            return Err(fail(
                EgaaStatus::InvalidArgument,
                format!("expected {} coordinates, got {n}", fx.len()),
            ));
        }
        slice_mut(x, n, "x")?.copy_from_slice(fx.as_slice());
        Ok(())
    })
}

/// Write the trace CSV (timing column left empty).
///
/// # Safety
/// `run` must be a live handle; `path` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn egaa_run_write_csv(run: *const EgaaRun, path: *const c_char) -> EgaaStatus {
    guarded(|| {
        let trace = &non_null(run, "run")?.trace;
        write_trace_csv(Path::new(c_str(path, "path")?), trace, false)?;
        Ok(())
    })
}

/// Momentum coefficients from mixing coefficients; both arrays hold `m` doubles.
///
/// # Safety
/// `theta` and `gamma` must each hold `m` doubles.
#[no_mangle]
pub unsafe extern "C" fn egaa_theta_to_gamma(theta: *const f64, m: usize, gamma: *mut f64) -> EgaaStatus {
    guarded(|| {
        let g = theta_to_gamma(&DVector::from_column_slice(slice(theta, m, "theta")?));
        slice_mut(gamma, m, "gamma")?.copy_from_slice(g.gamma.as_slice());
        Ok(())
    })
}

/// Inverse of [`egaa_theta_to_gamma`].
///
/// # Safety
/// `gamma` and `theta` must each hold `m` doubles.
#[no_mangle]
pub unsafe extern "C" fn egaa_gamma_to_theta(gamma: *const f64, m: usize, theta: *mut f64) -> EgaaStatus {
    guarded(|| {
        let g = MomentumCoefficients {
            gamma: DVector::from_column_slice(slice(gamma, m, "gamma")?),
        };
        let t = gamma_to_theta(&g);
        slice_mut(theta, m, "theta")?.copy_from_slice(t.theta.as_slice());
        Ok(())
    })
}

/// # Safety
/// `gamma` must hold `m` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn egaa_effective_mass(gamma: *const f64, m: usize, out: *mut f64) -> EgaaStatus {
    guarded(|| {
        let g = MomentumCoefficients {
            gamma: DVector::from_column_slice(slice(gamma, m, "gamma")?),
        };
        write_out(out, effective_mass(&g), "out")
    })
}

/// Guard factor for a candidate mass. `rho` receives the raw guard value,
/// `applied_rho` the factor after enforcing the growth bound and mass floor.
///
/// # Safety
/// `rho` and `applied_rho` must be writable.
#[no_mangle]
pub unsafe extern "C" fn egaa_energy_guard(
    m_curr: f64,
    m_prev: f64,
    delta_max: f64,
    mass_floor: f64,
    rho: *mut f64,
    applied_rho: *mut f64,
) -> EgaaStatus {
    guarded(|| {
        if !(delta_max > 0.0) {
            return Err(fail(EgaaStatus::InvalidArgument, "delta_max must be positive"));
        }
        if !(mass_floor > 0.0 && mass_floor < 0.5) {
            return Err(fail(EgaaStatus::InvalidArgument, "mass_floor must lie in (0, 0.5)"));
        }
        if !m_curr.is_finite() || !m_prev.is_finite() {
            return Err(fail(EgaaStatus::InvalidArgument, "masses must be finite"));
        }
        let (r, _) = energy_guard(m_curr, m_prev, delta_max);
        write_out(rho, r, "rho")?;
        write_out(
            applied_rho,
            enforce_mass_bounds(r, m_curr, m_prev, delta_max, mass_floor),
            "applied_rho",
        )
    })
}
