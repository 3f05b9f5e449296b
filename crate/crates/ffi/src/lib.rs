//! C ABI for the rtsolve transport solvers.
//!
//! A simulation is an opaque handle created from a config file, config text
//! or preset name and released with [`rts_simulation_free`]. Every fallible
//! entry point returns an [`RtsStatus`]; on failure the message is available
//! from [`rts_last_error_message`] on the same thread. Panics never cross the
//! boundary and are reported as [`RtsStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use rtsolve::config::{parse_config, ExperimentConfig};
use rtsolve::diagnostics::{condition_number, ConditionMethod, ConditionTarget};
use rtsolve::presets::preset;
use rtsolve::stepper::{advance, step_sizes};
use rtsolve::{Error, Problem, SimulationState, SolverConfig};

/// Largest parity system for which condition numbers use dense eigenvalues.
const DENSE_CONDITION_LIMIT: usize = 1024;

/// Result codes. The first four match the command-line exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RtsStatus {
    Ok = 0,
    /// A linear solve failed to converge or hit a breakdown.
    SolverFailure = 1,
    ConfigError = 2,
    IoError = 3,
    InvalidArgument = 4,
    NullPointer = 5,
    /// The output buffer is shorter than the data; nothing was written.
    BufferTooSmall = 6,
    Panic = 7,
}

/// Summary of the most recent linear solve.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RtsSolveReport {
    pub iterations: usize,
    pub matvec_count: usize,
    /// Relative preconditioned residual at exit.
    pub final_residual: f64,
    /// 1 when the tolerance was met.
    pub converged: u8,
}

/// Opaque simulation handle.
pub struct RtsSimulation {
    problem: Problem,
    solver: SolverConfig,
    state: SimulationState,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

fn status_of(e: &Error) -> RtsStatus {
    match e.root() {
        Error::Config { .. } => RtsStatus::ConfigError,
        Error::Io(_) => RtsStatus::IoError,
        Error::InvalidArgument(_)
        | Error::DimensionMismatch { .. }
        | Error::Unsupported(_)
        | Error::StiffLimit(_)
        | Error::Cfl { .. }
        | Error::DenseCapExceeded { .. } => RtsStatus::InvalidArgument,
        _ => RtsStatus::SolverFailure,
    }
}

/// Runs `f`, converting errors and panics into a status and a stored message.
fn guard(f: impl FnOnce() -> Result<(), (RtsStatus, String)>) -> RtsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            RtsStatus::Ok
        }
        Ok(Err((status, msg))) => {
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
            RtsStatus::Panic
        }
    }
}

fn lift<T>(r: rtsolve::Result<T>) -> Result<T, (RtsStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(what: &str) -> (RtsStatus, String) {
    (RtsStatus::NullPointer, format!("{what} is null"))
}

/// # Safety
/// `p` must be null or a valid NUL-terminated string.
unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, (RtsStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        (
            RtsStatus::InvalidArgument,
            format!("{what} is not valid UTF-8"),
        )
    })
}

/// # Safety
/// `p` must be null or point to a live handle.
unsafe fn sim_ref<'a>(p: *const RtsSimulation) -> Result<&'a RtsSimulation, (RtsStatus, String)> {
    p.as_ref().ok_or_else(|| null("simulation"))
}

/// # Safety
/// `p` must be null or point to a live handle not aliased elsewhere.
unsafe fn sim_mut<'a>(p: *mut RtsSimulation) -> Result<&'a mut RtsSimulation, (RtsStatus, String)> {
    p.as_mut().ok_or_else(|| null("simulation"))
}

fn build(cfg: &ExperimentConfig, epsilon: Option<f64>) -> rtsolve::Result<RtsSimulation> {
    let problem = cfg.problem()?;
    let dt = cfg.resolved_dt()?;
    let solver = cfg.solver_config(epsilon.unwrap_or(cfg.epsilon), dt);
    solver.validate(&problem)?;
    let f0 = cfg.initial_field(&problem)?;
    let state = SimulationState::new(&f0, &problem, solver.scheme)?;
    Ok(RtsSimulation {
        problem,
        solver,
        state,
    })
}

/// # Safety
/// `out` must be null or valid for one pointer write.
unsafe fn emit(
    out: *mut *mut RtsSimulation,
    make: impl FnOnce() -> Result<RtsSimulation, (RtsStatus, String)>,
) -> RtsStatus {
    if out.is_null() {
        set_error("output handle pointer is null");
        return RtsStatus::NullPointer;
    }
    *out = ptr::null_mut();
    guard(|| {
        let sim = make()?;
        *out = Box::into_raw(Box::new(sim));
        Ok(())
    })
}

/// Creates a simulation from a config file at `path`.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rts_simulation_from_config_file(
    path: *const c_char,
    out: *mut *mut RtsSimulation,
) -> RtsStatus {
    emit(out, || {
        let path = read_str(path, "path")?;
        let text = lift(std::fs::read_to_string(Path::new(path)).map_err(Error::from))?;
        let cfg = lift(parse_config(&text))?;
        lift(build(&cfg, None))
    })
}

/// Creates a simulation from config text.
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rts_simulation_from_config_text(
    text: *const c_char,
    out: *mut *mut RtsSimulation,
) -> RtsStatus {
    emit(out, || {
        let cfg = lift(parse_config(read_str(text, "config text")?))?;
        lift(build(&cfg, None))
    })
}

/// Creates a simulation from a named preset. A finite positive `epsilon`
/// overrides the preset value; pass NaN to keep it.
///
/// # Safety
/// `name` must be a NUL-terminated string; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rts_simulation_from_preset(
    name: *const c_char,
    epsilon: f64,
    out: *mut *mut RtsSimulation,
) -> RtsStatus {
    emit(out, || {
        let name = read_str(name, "preset name")?;
        let eps = if epsilon.is_nan() {
            None
        } else {
            Some(epsilon)
        };
        if let Some(e) = eps {
            if !(e.is_finite() && e > 0.0) {
                return Err((
                    RtsStatus::InvalidArgument,
                    format!("epsilon must be positive, got {e}"),
                ));
            }
        }
        let cfg = lift(preset(name, eps, None, None))?;
        lift(build(&cfg, eps))
    })
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `sim` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rts_simulation_free(sim: *mut RtsSimulation) {
    if !sim.is_null() {
        let _ = catch_unwind(AssertUnwindSafe(|| drop(Box::from_raw(sim))));
    }
}

/// Takes one step of the configured size.
///
/// # Safety
/// `sim` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn rts_simulation_step(sim: *mut RtsSimulation) -> RtsStatus {
    guard(|| {
        let s = sim_mut(sim)?;
        let dt = s.solver.dt;
        lift(advance(&mut s.state, &s.problem, &s.solver, dt))
    })
}

/// Steps until time `t_end`, shortening the last step to land on it.
/// The state is unchanged past the first failing step.
///
/// # Safety
/// `sim` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn rts_simulation_advance(sim: *mut RtsSimulation, t_end: f64) -> RtsStatus {
    guard(|| {
        let s = sim_mut(sim)?;
        if !(t_end.is_finite() && t_end >= s.state.t) {
            return Err((
                RtsStatus::InvalidArgument,
                format!("t_end = {t_end} is before the current time {}", s.state.t),
            ));
        }
        let steps = step_sizes(t_end - s.state.t, s.solver.dt);
        for (k, h) in steps.iter().enumerate() {
            lift(advance(&mut s.state, &s.problem, &s.solver, *h))?;
            if k + 1 == steps.len() {
                s.state.t = t_end;
            }
        }
        Ok(())
    })
}

/// Current simulation time, or NaN for a null handle.
///
/// # Safety
/// `sim` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rts_simulation_time(sim: *const RtsSimulation) -> f64 {
    sim.as_ref().map_or(f64::NAN, |s| s.state.t)
}

/// Number of completed steps, or 0 for a null handle.
///
/// # Safety
/// `sim` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rts_simulation_step_count(sim: *const RtsSimulation) -> usize {
    sim.as_ref().map_or(0, |s| s.state.step)
}

/// Number of spatial cells, or 0 for a null handle.
///
/// # Safety
/// `sim` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rts_simulation_cell_count(sim: *const RtsSimulation) -> usize {
    sim.as_ref().map_or(0, |s| s.problem.n_cells())
}

/// Number of angular nodes, or 0 for a null handle.
///
/// # Safety
/// `sim` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rts_simulation_node_count(sim: *const RtsSimulation) -> usize {
    sim.as_ref().map_or(0, |s| s.problem.n_nodes())
}

/// Copies the cell densities into `out`, which must hold `cell_count` values.
///
/// # Safety
/// `sim` must be a live handle; `out` must be valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn rts_simulation_density(
    sim: *const RtsSimulation,
    out: *mut f64,
    len: usize,
) -> RtsStatus {
    guard(|| {
        let s = sim_ref(sim)?;
        if out.is_null() {
            return Err(null("output buffer"));
        }
        let rho = lift(s.state.density(&s.problem))?;
        copy_out(rho.values(), out, len)
    })
}

/// # Safety
/// `out` must be valid for `len` writes.
unsafe fn copy_out(src: &[f64], out: *mut f64, len: usize) -> Result<(), (RtsStatus, String)> {
    if len < src.len() {
        return Err((
            RtsStatus::BufferTooSmall,
            format!("buffer holds {len} values, {} needed", src.len()),
        ));
    }
    ptr::copy_nonoverlapping(src.as_ptr(), out, src.len());
    Ok(())
}

/// Copies quadrature nodes and weights, `node_count` values each. Nodes are
/// direction cosines in slab geometry and angles on the circle.
///
/// # Safety
/// `sim` must be a live handle; both buffers must be valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn rts_simulation_quadrature(
    sim: *const RtsSimulation,
    nodes: *mut f64,
    weights: *mut f64,
    len: usize,
) -> RtsStatus {
    guard(|| {
        let s = sim_ref(sim)?;
        if nodes.is_null() || weights.is_null() {
            return Err(null("output buffer"));
        }
        let q = &s.problem.quadrature;
        copy_out(q.nodes(), nodes, len)?;
        copy_out(q.weights(), weights, len)
    })
}

/// Writes the report of the latest linear solve. Before the first step the
/// report is all zeros.
///
/// # Safety
/// `sim` must be a live handle; `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn rts_simulation_last_report(
    sim: *const RtsSimulation,
    out: *mut RtsSolveReport,
) -> RtsStatus {
    guard(|| {
        let s = sim_ref(sim)?;
        let out = out.as_mut().ok_or_else(|| null("report"))?;
        *out = s
            .state
            .last_report()
            .map_or_else(RtsSolveReport::default, |r| RtsSolveReport {
                iterations: r.iterations,
                matvec_count: r.matvec_count,
                final_residual: r.final_residual(),
                converged: u8::from(r.converged),
            });
        Ok(())
    })
}

/// Condition number of the even-parity system at the handle's ε and Δt.
/// A nonzero `preconditioned` selects the collision-shift preconditioned
/// operator instead of `A + B`. Dense eigenvalues are used up to 1024
/// unknowns and Lanczos estimates beyond.
///
/// # Safety
/// `sim` must be a live handle; `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn rts_simulation_condition_number(
    sim: *const RtsSimulation,
    preconditioned: u8,
    out: *mut f64,
) -> RtsStatus {
    guard(|| {
        let s = sim_ref(sim)?;
        let out = out.as_mut().ok_or_else(|| null("output"))?;
        let scalars = lift(s.solver.scalars())?;
        let target = if preconditioned != 0 {
            ConditionTarget::Preconditioned
        } else {
            ConditionTarget::APlusB
        };
        let unknowns = s.problem.n_cells() * s.problem.n_nodes() / 2;
        let method = if unknowns <= DENSE_CONDITION_LIMIT {
            ConditionMethod::Dense
        } else {
            ConditionMethod::Iterative
        };
        *out = lift(condition_number(&s.problem, &scalars, target, method))?.kappa;
        Ok(())
    })
}

/// Copies the calling thread's last error message into `buf` as a
/// NUL-terminated string, truncating to fit. Returns the full message
/// length including the terminator, so a call with `len = 0` sizes the
/// buffer. The message is empty after a successful call.
///
/// # Safety
/// `buf` must be null or valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn rts_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        bytes.len() + 1
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn rts_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
