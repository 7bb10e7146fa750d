//! C ABI for nlfk. Problems are opaque handles built from scenario TOML
//! text; every call returns an [`NlfkStatus`] and leaves a message for
//! [`nlfk_last_error_message`] on failure.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use nalgebra::DMatrix;
use nlfk::harness::{fd_setup, run_scenario, Scenario};
use nlfk::value::{value_bruteforce, value_markovian, ParabolicProblem};
use nlfk::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NlfkStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidConfig = 2,
    /// A numerical guard tripped (CFL, rank deficiency, non-finite values).
    Numerical = 3,
    InvalidArgument = 4,
    Panic = 5,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NlfkMethod {
    BruteForce = 0,
    Markovian = 1,
}

/// Opaque problem handle.
pub struct NlfkProblem {
    scenario: Scenario,
    problem: ParabolicProblem,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let c = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> NlfkStatus {
    match err {
        Error::Config(_) => NlfkStatus::InvalidConfig,
        e if e.is_numerical_guard() => NlfkStatus::Numerical,
        _ => NlfkStatus::InvalidArgument,
    }
}

fn guard(f: impl FnOnce() -> Result<(), (NlfkStatus, String)>) -> NlfkStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => NlfkStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside nlfk");
            NlfkStatus::Panic
        }
    }
}

fn lib_err(e: Error) -> (NlfkStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (NlfkStatus, String) {
    (NlfkStatus::NullPointer, format!("{what} is null"))
}

unsafe fn c_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, (NlfkStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (NlfkStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn point<'a>(h: &NlfkProblem, x: *const f64, dim: usize) -> Result<&'a [f64], (NlfkStatus, String)> {
    if x.is_null() {
        return Err(null("x"));
    }
    if dim != h.problem.dim() {
        return Err((
            NlfkStatus::InvalidArgument,
            format!("x has {dim} entries, problem dimension is {}", h.problem.dim()),
        ));
    }
    Ok(std::slice::from_raw_parts(x, dim))
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next nlfk call on the same thread.
#[no_mangle]
pub extern "C" fn nlfk_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Build a problem from scenario TOML text.
///
/// # Safety
/// `config` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn nlfk_problem_from_config(config: *const c_char, out: *mut *mut NlfkProblem) -> NlfkStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let text = c_str(config, "config")?;
        let scenario = Scenario::parse(text).map_err(lib_err)?;
        let problem = scenario.problem().map_err(lib_err)?;
        *out = Box::into_raw(Box::new(NlfkProblem { scenario, problem }));
        Ok(())
    })
}

/// # Safety
/// `problem` must come from [`nlfk_problem_from_config`] and not be freed
/// yet; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn nlfk_problem_free(problem: *mut NlfkProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// # Safety
/// `problem` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn nlfk_problem_dim(problem: *const NlfkProblem, out: *mut usize) -> NlfkStatus {
    guard(|| {
        let h = problem.as_ref().ok_or_else(|| null("problem"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = h.problem.dim();
        Ok(())
    })
}

/// Monte Carlo value at `(t, x)` with the scenario's blocks or state bins.
///
/// # Safety
/// `problem` must be a live handle, `x` must point to `dim` doubles and
/// `value`, `std_error` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn nlfk_value(
    problem: *const NlfkProblem,
    method: NlfkMethod,
    t: f64,
    x: *const f64,
    dim: usize,
    paths: usize,
    seed: u64,
    value: *mut f64,
    std_error: *mut f64,
) -> NlfkStatus {
    guard(|| {
        let h = problem.as_ref().ok_or_else(|| null("problem"))?;
        let x = point(h, x, dim)?;
        if value.is_null() || std_error.is_null() {
            return Err(null("output"));
        }
        let num = &h.scenario.numerics;
        let est = match method {
            NlfkMethod::BruteForce => value_bruteforce(&h.problem, t, x, num.blocks, paths, seed),
            NlfkMethod::Markovian => value_markovian(&h.problem, t, x, num.state_bins, paths, seed),
        }
        .map_err(lib_err)?;
        *value = est.value;
        *std_error = est.std_error;
        Ok(())
    })
}

/// Finite-difference value at `(t, x)` on the scenario's grid.
///
/// # Safety
/// `problem` must be a live handle, `x` must point to `dim` doubles and
/// `value` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn nlfk_fd_probe(
    problem: *const NlfkProblem,
    t: f64,
    x: *const f64,
    dim: usize,
    value: *mut f64,
) -> NlfkStatus {
    guard(|| {
        let h = problem.as_ref().ok_or_else(|| null("problem"))?;
        let x = point(h, x, dim)?;
        if value.is_null() {
            return Err(null("value"));
        }
        if !(0.0..=h.problem.horizon()).contains(&t) {
            return Err((NlfkStatus::InvalidArgument, format!("t = {t} outside [0, T]")));
        }
        let (grid, steps) = fd_setup(&h.scenario, &h.problem).map_err(lib_err)?;
        let field = nlfk::fd::solve_fd(&h.problem, &grid, steps).map_err(lib_err)?;
        *value = field.probe(t, x);
        Ok(())
    })
}

/// Principal square root of a symmetric PSD `n x n` matrix, row-major.
///
/// # Safety
/// `a` and `out` must each point to `n * n` doubles.
#[no_mangle]
pub unsafe extern "C" fn nlfk_psd_sqrt(a: *const f64, n: usize, out: *mut f64) -> NlfkStatus {
    guard(|| {
        if a.is_null() || out.is_null() {
            return Err(null("matrix"));
        }
        if n == 0 {
            return Err((NlfkStatus::InvalidArgument, "n must be positive".into()));
        }
        let m = DMatrix::from_row_slice(n, n, std::slice::from_raw_parts(a, n * n));
        let r = nlfk::sublinear::psd_sqrt(&m).map_err(lib_err)?;
        let dst = std::slice::from_raw_parts_mut(out, n * n);
        for i in 0..n {
            for j in 0..n {
                dst[i * n + j] = r[(i, j)];
            }
        }
        Ok(())
    })
}

/// Run a scenario file and write its artifacts into `out_dir`. `exit_code`
/// receives the CLI exit code (0 pass, 1 fail, 2 config, 3 numerical).
/// A negative `seed` keeps the config seed.
///
/// # Safety
/// `config_path`, `out_dir` must be NUL-terminated strings and `exit_code`
/// a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn nlfk_run_scenario(
    config_path: *const c_char,
    out_dir: *const c_char,
    seed: i64,
    exit_code: *mut i32,
) -> NlfkStatus {
    guard(|| {
        let config = c_str(config_path, "config_path")?;
        let out = c_str(out_dir, "out_dir")?;
        if exit_code.is_null() {
            return Err(null("exit_code"));
        }
        let seed = u64::try_from(seed).ok();
        let (code, text) = run_scenario(Path::new(config), Path::new(out), seed);
        *exit_code = code;
        match code {
            0 | 1 => Ok(()),
            2 => Err((NlfkStatus::InvalidConfig, text)),
            _ => Err((NlfkStatus::Numerical, text)),
        }
    })
}
