//! C interface to `bcslab`.
//!
//! Every fallible function returns a [`BcsStatus`]. On failure the message
//! is available from [`bcs_last_error`] on the calling thread until the next
//! call into this library. Handles and strings handed out here are released
//! with the matching `*_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use bcslab::analysis::{run_verification, VerifyOptions};
use bcslab::cli::config::RunConfig;
use bcslab::gapsolve::{solve, Equation, Outcome, SolverOptions};
use bcslab::model::{explicit_modes, Instance, Kernel, Physics};
use bcslab::Error;

/// Result of a call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BcsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Argument = 3,
    Validation = 4,
    Resource = 5,
    Convergence = 6,
    Internal = 7,
    Config = 8,
    Io = 9,
    BufferTooSmall = 10,
    Panic = 11,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BcsEquation {
    Classic = 0,
    New = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BcsOutcome {
    Converged = 0,
    Trivial = 1,
    NotConverged = 2,
}

/// Gap iteration settings; see [`bcs_solver_options_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BcsSolverOptions {
    pub init: f64,
    pub damping: f64,
    pub tol: f64,
    pub max_iter: usize,
}

/// Summary of a gap solve. `dsum` and `max_correction` are NaN for the
/// classic equation.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BcsGapInfo {
    pub outcome: BcsOutcome,
    pub converged: bool,
    pub iterations: usize,
    pub residual: f64,
    pub dsum: f64,
    pub max_correction: f64,
}

/// Opaque handle: a validated instance with its solver and check settings.
pub struct BcsInstance {
    instance: Instance,
    verify: VerifyOptions,
}

struct Failure {
    status: BcsStatus,
    message: String,
}

impl Failure {
    fn new(status: BcsStatus, message: impl Into<String>) -> Self {
        Failure {
            status,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::Argument(_) => BcsStatus::Argument,
            Error::Validation(_) => BcsStatus::Validation,
            Error::Resource(_) => BcsStatus::Resource,
            Error::Convergence { .. } => BcsStatus::Convergence,
            Error::Internal(_) => BcsStatus::Internal,
            Error::Config(_) => BcsStatus::Config,
            Error::Io(_) => BcsStatus::Io,
        };
        Failure::new(status, e.to_string())
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: Option<String>) {
    let c = message.map(|m| CString::new(m.replace('\0', " ")).expect("NUL bytes removed"));
    LAST_ERROR.with(|slot| *slot.borrow_mut() = c);
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> BcsStatus {
    let result = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|payload| {
        let text = payload
            .downcast_ref::<&str>()
            .map(|s| s.to_string())
            .or_else(|| payload.downcast_ref::<String>().cloned())
            .unwrap_or_else(|| "unknown panic".into());
        Err(Failure::new(BcsStatus::Panic, format!("panic: {text}")))
    });
    match result {
        Ok(()) => {
            set_last_error(None);
            BcsStatus::Ok
        }
        Err(f) => {
            set_last_error(Some(f.message));
            f.status
        }
    }
}

fn non_null<T>(p: *const T, name: &str) -> Result<(), Failure> {
    if p.is_null() {
        Err(Failure::new(BcsStatus::NullPointer, format!("{name} is null")))
    } else {
        Ok(())
    }
}

unsafe fn handle<'a>(p: *const BcsInstance) -> Result<&'a BcsInstance, Failure> {
    non_null(p, "instance")?;
    Ok(&*p)
}

unsafe fn handle_mut<'a>(p: *mut BcsInstance) -> Result<&'a mut BcsInstance, Failure> {
    non_null(p, "instance")?;
    Ok(&mut *p)
}

fn boxed(instance: Instance, verify: VerifyOptions) -> *mut BcsInstance {
    Box::into_raw(Box::new(BcsInstance { instance, verify }))
}

/// Message of the last failed call on this thread, or null. The pointer is
/// valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn bcs_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

#[no_mangle]
pub extern "C" fn bcs_solver_options_default() -> BcsSolverOptions {
    let d = SolverOptions::default();
    BcsSolverOptions {
        init: d.init,
        damping: d.damping,
        tol: d.tol,
        max_iter: d.max_iter,
    }
}

/// Build an instance from a JSON run configuration.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn bcs_instance_from_config_json(json: *const c_char, out: *mut *mut BcsInstance) -> BcsStatus {
    guard(|| {
        non_null(json, "json")?;
        non_null(out, "out")?;
        let text = CStr::from_ptr(json)
            .to_str()
            .map_err(|e| Failure::new(BcsStatus::InvalidUtf8, e.to_string()))?;
        let config = RunConfig::from_json(text)?;
        let instance = config.instance()?;
        *out = boxed(instance, config.verify_options()?);
        Ok(())
    })
}

/// Build an instance from `modes` integer wave vectors (`3 * modes` values,
/// in units of 2π/L with L = 2π), an optional dispersion `xi` (null for
/// `|k|²`) and a row-major `modes * modes` kernel in the listed order.
///
/// # Safety
/// The arrays must hold the stated number of elements and `out` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn bcs_instance_from_arrays(
    modes: usize,
    wave_vectors: *const i32,
    xi: *const f64,
    kernel: *const f64,
    out: *mut *mut BcsInstance,
) -> BcsStatus {
    guard(|| {
        non_null(wave_vectors, "wave_vectors")?;
        non_null(kernel, "kernel")?;
        non_null(out, "out")?;
        if modes == 0 {
            return Err(Failure::new(BcsStatus::Argument, "at least one mode is required"));
        }
        let flat = std::slice::from_raw_parts(wave_vectors, 3 * modes);
        let ks: Vec<[i32; 3]> = flat.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
        let xi = (!xi.is_null()).then(|| std::slice::from_raw_parts(xi, modes));
        let table = explicit_modes(&ks, xi, 2.0 * std::f64::consts::PI, Physics::default())?;
        let listed = std::slice::from_raw_parts(kernel, modes * modes);
        let mut k = Kernel::zeros(modes);
        for (i, ki) in ks.iter().enumerate() {
            for (j, kj) in ks.iter().enumerate() {
                let (a, b) = (table.index_of(*ki).expect("listed mode"), table.index_of(*kj).expect("listed mode"));
                k.set(a, b, listed[i * modes + j]);
            }
        }
        *out = boxed(Instance::new(table, k)?, VerifyOptions::default());
        Ok(())
    })
}

/// # Safety
/// `instance` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn bcs_instance_free(instance: *mut BcsInstance) {
    if !instance.is_null() {
        drop(Box::from_raw(instance));
    }
}

/// Number of modes, or 0 for a null handle.
///
/// # Safety
/// `instance` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn bcs_instance_modes(instance: *const BcsInstance) -> usize {
    instance.as_ref().map_or(0, |h| h.instance.modes().len())
}

/// Write the wave vectors in internal mode order, the order used by
/// [`bcs_solve_gap`]: `3 * modes` integers.
///
/// # Safety
/// `out` must hold `len` integers.
#[no_mangle]
pub unsafe extern "C" fn bcs_instance_wave_vectors(instance: *const BcsInstance, out: *mut i32, len: usize) -> BcsStatus {
    guard(|| {
        let h = handle(instance)?;
        non_null(out, "out")?;
        let ks = h.instance.modes().modes();
        if len < 3 * ks.len() {
            return Err(Failure::new(
                BcsStatus::BufferTooSmall,
                format!("out holds {len} values, {} needed", 3 * ks.len()),
            ));
        }
        let flat: Vec<i32> = ks.iter().flatten().copied().collect();
        std::slice::from_raw_parts_mut(out, flat.len()).copy_from_slice(&flat);
        Ok(())
    })
}

/// # Safety
/// `instance` and `options` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn bcs_instance_set_solver(
    instance: *mut BcsInstance,
    options: *const BcsSolverOptions,
) -> BcsStatus {
    guard(|| {
        let h = handle_mut(instance)?;
        non_null(options, "options")?;
        let o = &*options;
        let solver = SolverOptions {
            init: o.init,
            damping: o.damping,
            tol: o.tol,
            max_iter: o.max_iter,
            zero_d: false,
        };
        solver.validate()?;
        h.verify.solver = solver;
        Ok(())
    })
}

/// # Safety
/// `instance` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn bcs_instance_set_seed(instance: *mut BcsInstance, seed: u64) -> BcsStatus {
    guard(|| {
        handle_mut(instance)?.verify.seed = seed;
        Ok(())
    })
}

/// Solve a gap equation and write `Δ_k` in internal (sorted) mode order.
/// A solve that does not converge still fills `delta` and `info` and
/// returns [`BcsStatus::Convergence`].
///
/// # Safety
/// `delta` must hold `len` doubles; `info` may be null.
#[no_mangle]
pub unsafe extern "C" fn bcs_solve_gap(
    instance: *const BcsInstance,
    equation: BcsEquation,
    delta: *mut f64,
    len: usize,
    info: *mut BcsGapInfo,
) -> BcsStatus {
    guard(|| {
        let h = handle(instance)?;
        non_null(delta, "delta")?;
        let m = h.instance.modes().len();
        if len < m {
            return Err(Failure::new(BcsStatus::BufferTooSmall, format!("delta holds {len} values, {m} needed")));
        }
        let eq = match equation {
            BcsEquation::Classic => Equation::Classic,
            BcsEquation::New => Equation::New,
        };
        let sol = solve(h.instance.modes(), h.instance.kernel(), eq, &h.verify.solver)?;
        std::slice::from_raw_parts_mut(delta, m).copy_from_slice(sol.delta.values());
        if let Some(info) = info.as_mut() {
            *info = BcsGapInfo {
                outcome: match sol.outcome {
                    Outcome::Converged => BcsOutcome::Converged,
                    Outcome::Trivial => BcsOutcome::Trivial,
                    Outcome::NotConverged => BcsOutcome::NotConverged,
                },
                converged: sol.converged,
                iterations: sol.iterations,
                residual: sol.residual_inf,
                dsum: sol.dsum.unwrap_or(f64::NAN),
                max_correction: sol.max_correction.unwrap_or(f64::NAN),
            };
        }
        if !sol.converged {
            return Err(Error::Convergence {
                what: "gap iteration".into(),
                iterations: sol.iterations,
            }
            .into());
        }
        Ok(())
    })
}

/// Run the verification checks and return the report as JSON. Failed checks
/// are reported through `failed`, not the status.
///
/// # Safety
/// `json` must be writable; release the string with [`bcs_string_free`].
/// `failed` may be null.
#[no_mangle]
pub unsafe extern "C" fn bcs_verify(instance: *const BcsInstance, json: *mut *mut c_char, failed: *mut usize) -> BcsStatus {
    guard(|| {
        let h = handle(instance)?;
        non_null(json, "json")?;
        let report = run_verification(&h.instance, &h.verify)?;
        let text = serde_json::to_string(&report).map_err(|e| Failure::new(BcsStatus::Internal, e.to_string()))?;
        if let Some(f) = failed.as_mut() {
            *f = report.failures().count();
        }
        *json = CString::new(text).expect("JSON has no NUL bytes").into_raw();
        Ok(())
    })
}

/// # Safety
/// `s` must be null or a string returned by this library.
#[no_mangle]
pub unsafe extern "C" fn bcs_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
