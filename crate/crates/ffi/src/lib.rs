//! C ABI for levelcraft.
//!
//! Problems and reports are opaque handles created and released by this
//! library. Every fallible entry point returns an [`LcStatus`]; on failure the
//! thread-local message from [`lc_last_error_message`] says why.

use std::cell::RefCell;
use std::ffi::{c_char, c_int, c_void, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use levelcraft::apmm::{apmm_solve, AccelSchedule, ApmmConfig, LocalizerPolicy};
use levelcraft::levelset::{fixed_point_solve, secant_solve, LevelConfig};
use levelcraft::problems::{desk_scaled, gen_lmi, gen_qcqp, gen_socp_kkt, load_npc, NpcHyper, NpcMode};
use levelcraft::{BoxDomain, ConstrainedProblem, ConvexFunction, Error, ExitStatus, Oracle, Solution};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LcStatus {
    Ok = 0,
    /// The solver stopped at its iteration cap. A report is still returned.
    NotConverged = 1,
    InvalidArgument = 2,
    NullPointer = 3,
    OracleFailure = 4,
    SubproblemFailure = 5,
    /// The supplied optimal value is not attainable.
    InvalidTargetValue = 6,
    Io = 7,
    Panic = 8,
}

/// Opaque problem handle.
pub struct LcProblem {
    inner: ConstrainedProblem,
}

/// Opaque result of one solver run.
pub struct LcReport {
    x: Vec<f64>,
    status: ExitStatus,
    iterations: usize,
    composite_evals: u64,
    gradient_evals: u64,
    objective: f64,
    violation: f64,
    algorithm: CString,
    message: CString,
    trace_csv: CString,
}

/// Options of the APMM solver.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct LcApmmOptions {
    pub eps: f64,
    pub max_iters: usize,
    /// Number of retained objective cuts; 0 keeps all of them.
    pub bundle: usize,
    /// Nonzero for the accelerated schedule, zero for the plain Polyak method.
    pub accelerated: c_int,
}

/// Options of the level-set solvers.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct LcLevelOptions {
    pub alpha: f64,
    pub beta: f64,
    pub nu: f64,
    pub eps: f64,
    /// Outer iteration cap; 0 derives one from the initial bracket.
    pub max_outer: usize,
}

/// Evaluates piece `piece` at `x`: 0 is the objective, `i >= 1` is the
/// constraint `g_i`. Writes the value and `dim` subgradient entries and
/// returns 0, or returns nonzero on failure.
pub type LcEvalFn = Option<
    unsafe extern "C" fn(
        user: *mut c_void,
        piece: usize,
        x: *const f64,
        dim: usize,
        value: *mut f64,
        grad: *mut f64,
    ) -> c_int,
>;

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let text = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).unwrap_or_default());
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::default());
}

fn status_of(err: &Error) -> LcStatus {
    match err {
        Error::OracleFailure { .. } => LcStatus::OracleFailure,
        Error::SubproblemFailure(_) => LcStatus::SubproblemFailure,
        Error::InvalidTargetValue { .. } => LcStatus::InvalidTargetValue,
        Error::Io(_) | Error::Ingest { .. } => LcStatus::Io,
        Error::DimensionMismatch { .. } | Error::InvalidParameter(_) | Error::UnboundedDomain(_) | Error::Config(_) => {
            LcStatus::InvalidArgument
        }
    }
}

struct Failure(LcStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(LcStatus::InvalidArgument, msg.into())
}

fn null(name: &str) -> Failure {
    Failure(LcStatus::NullPointer, format!("`{name}` is null"))
}

/// Runs `f`, records its error and converts panics into `Panic`.
fn guard(f: impl FnOnce() -> Result<LcStatus, Failure>) -> LcStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(status)) => status,
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
            LcStatus::Panic
        }
    }
}

unsafe fn store<T>(out: *mut *mut T, value: T) {
    *out = Box::into_raw(Box::new(value));
}

fn store_problem(out: *mut *mut LcProblem, p: Result<ConstrainedProblem, Error>) -> Result<LcStatus, Failure> {
    let inner = p?;
    unsafe { store(out, LcProblem { inner }) };
    Ok(LcStatus::Ok)
}

unsafe fn slice<'a>(ptr: *const f64, len: usize, name: &str) -> Result<&'a [f64], Failure> {
    if ptr.is_null() {
        return Err(null(name));
    }
    Ok(std::slice::from_raw_parts(ptr, len))
}

/// Message of the last failed call on this thread, or an empty string. The
/// pointer stays valid until the next call into this library on the thread.
#[no_mangle]
pub extern "C" fn lc_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn lc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// The desk QCQP in two variables with its constraint divided by `scale`.
///
/// # Safety
/// `out` must be a valid pointer to writable storage.
#[no_mangle]
pub unsafe extern "C" fn lc_problem_desk(scale: f64, out: *mut *mut LcProblem) -> LcStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(invalid("scale must be positive and finite"));
        }
        store_problem(out, Ok(desk_scaled(scale)))
    })
}

/// Random convex QCQP with `n` variables and `m` constraints.
///
/// # Safety
/// `out` must be a valid pointer to writable storage.
#[no_mangle]
pub unsafe extern "C" fn lc_problem_qcqp(seed: u64, n: usize, m: usize, out: *mut *mut LcProblem) -> LcStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        store_problem(out, gen_qcqp(seed, n, m))
    })
}

/// SOCP optimality system with `q` variables, `p` equality rows and `cones`
/// equal second-order cones. The optimal value is 0.
///
/// # Safety
/// `out` must be a valid pointer to writable storage.
#[no_mangle]
pub unsafe extern "C" fn lc_problem_socp(
    seed: u64,
    q: usize,
    p: usize,
    cones: usize,
    out: *mut *mut LcProblem,
) -> LcStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        store_problem(out, gen_socp_kkt(seed, q, p, cones))
    })
}

/// Joint Lyapunov LMI feasibility with `k` matrices of order `q`. The optimal
/// value is 0.
///
/// # Safety
/// `out` must be a valid pointer to writable storage.
#[no_mangle]
pub unsafe extern "C" fn lc_problem_lmi(seed: u64, q: usize, k: usize, out: *mut *mut LcProblem) -> LcStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        store_problem(out, gen_lmi(seed, q, k))
    })
}

/// Neyman-Pearson classification from a CSV file whose last column is the
/// label. `multiclass` selects the multiclass model.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lc_problem_npc_csv(
    path: *const c_char,
    has_header: c_int,
    multiclass: c_int,
    out: *mut *mut LcProblem,
) -> LcStatus {
    guard(|| {
        if path.is_null() {
            return Err(null("path"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let path = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| invalid("path is not valid UTF-8"))?;
        let mode = if multiclass != 0 {
            NpcMode::Multiclass
        } else {
            NpcMode::Binary
        };
        store_problem(
            out,
            load_npc(Path::new(path), has_header != 0, mode, &NpcHyper::default()),
        )
    })
}

struct Callback {
    eval: unsafe extern "C" fn(*mut c_void, usize, *const f64, usize, *mut f64, *mut f64) -> c_int,
    user: *mut c_void,
    piece: usize,
    dim: usize,
}

// The solvers call oracles sequentially from the thread that invoked them.
unsafe impl Send for Callback {}
unsafe impl Sync for Callback {}

impl ConvexFunction for Callback {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, x: &[f64]) -> levelcraft::Result<(f64, Vec<f64>)> {
        let mut value = f64::NAN;
        let mut grad = vec![f64::NAN; self.dim];
        let rc = unsafe {
            (self.eval)(
                self.user,
                self.piece,
                x.as_ptr(),
                self.dim,
                &mut value,
                grad.as_mut_ptr(),
            )
        };
        if rc != 0 {
            return Err(Error::OracleFailure {
                name: format!("piece {}", self.piece),
                detail: format!("callback returned {rc}"),
            });
        }
        Ok((value, grad))
    }
}

/// Problem defined by a user callback with `num_constraints` constraints over
/// the box `[lower, upper]`. Either bound array may be null for an unbounded
/// side; the level-set solvers need a bounded box. `user` is passed through
/// untouched and must outlive the problem.
///
/// # Safety
/// Non-null bound arrays must hold `dim` values; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn lc_problem_custom(
    dim: usize,
    num_constraints: usize,
    eval: LcEvalFn,
    user: *mut c_void,
    lower: *const f64,
    upper: *const f64,
    out: *mut *mut LcProblem,
) -> LcStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let eval = eval.ok_or_else(|| null("eval"))?;
        if dim == 0 {
            return Err(invalid("dimension must be positive"));
        }
        let bound = |ptr: *const f64, fill: f64| {
            if ptr.is_null() {
                vec![fill; dim]
            } else {
                std::slice::from_raw_parts(ptr, dim).to_vec()
            }
        };
        let domain = BoxDomain::new(bound(lower, f64::NEG_INFINITY), bound(upper, f64::INFINITY))?;
        let oracle = |piece: usize| {
            let name = if piece == 0 {
                "f".to_string()
            } else {
                format!("g{piece}")
            };
            Oracle::new(name, Callback { eval, user, piece, dim })
        };
        let constraints = (1..=num_constraints).map(oracle).collect();
        store_problem(out, ConstrainedProblem::new("custom", oracle(0), constraints, domain))
    })
}

/// Records a known optimal value, used by APMM when none is passed.
///
/// # Safety
/// `problem` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn lc_problem_set_fstar(problem: *mut LcProblem, fstar: f64) -> LcStatus {
    guard(|| {
        let p = problem.as_mut().ok_or_else(|| null("problem"))?;
        if !fstar.is_finite() {
            return Err(invalid("fstar must be finite"));
        }
        p.inner.known_fstar = Some(fstar);
        Ok(LcStatus::Ok)
    })
}

/// Number of variables, or 0 for a null handle.
///
/// # Safety
/// `problem` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn lc_problem_dim(problem: *const LcProblem) -> usize {
    problem.as_ref().map_or(0, |p| p.inner.dim())
}

/// Number of functional constraints, or 0 for a null handle.
///
/// # Safety
/// `problem` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn lc_problem_num_constraints(problem: *const LcProblem) -> usize {
    problem.as_ref().map_or(0, |p| p.inner.num_constraints())
}

/// Releases a problem. Null is ignored.
///
/// # Safety
/// `problem` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn lc_problem_free(problem: *mut LcProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

#[no_mangle]
pub extern "C" fn lc_apmm_options_default() -> LcApmmOptions {
    let d = ApmmConfig::default();
    let bundle = match d.policy {
        LocalizerPolicy::LimitedMemory(k) => k,
        _ => 0,
    };
    LcApmmOptions {
        eps: d.eps,
        max_iters: d.max_iters,
        bundle,
        accelerated: 1,
    }
}

#[no_mangle]
pub extern "C" fn lc_fixed_point_options_default() -> LcLevelOptions {
    LcLevelOptions {
        alpha: 1.36,
        beta: 0.9,
        nu: 0.9,
        eps: 1e-3,
        max_outer: 0,
    }
}

#[no_mangle]
pub extern "C" fn lc_secant_options_default() -> LcLevelOptions {
    LcLevelOptions {
        alpha: 1.365,
        beta: 1.0,
        nu: 0.9,
        eps: 1e-3,
        max_outer: 0,
    }
}

fn finish(p: &ConstrainedProblem, sol: Solution, out: *mut *mut LcReport) -> Result<LcStatus, Failure> {
    let r = &sol.report;
    let trace = levelcraft::cli::trace_csv(&r.records)?;
    let (composite_evals, gradient_evals) = (r.composite_evals, r.total_gevals());
    let ev = p.evaluate(&sol.x)?;
    let cstr = |s: &str| CString::new(s.replace('\0', " ")).unwrap_or_default();
    let report = LcReport {
        status: r.status,
        iterations: r.iterations,
        composite_evals,
        gradient_evals,
        objective: ev.objective(),
        violation: ev.violation(),
        algorithm: cstr(&r.algorithm),
        message: cstr(r.message.as_deref().unwrap_or("")),
        trace_csv: cstr(&trace),
        x: sol.x,
    };
    let status = match report.status {
        ExitStatus::Converged => LcStatus::Ok,
        ExitStatus::NotConverged => LcStatus::NotConverged,
    };
    unsafe { store(out, report) };
    Ok(status)
}

/// Accelerated Polyak minorant method for a problem with known optimal value.
/// `fstar` may be NaN to use the value recorded on the problem. `x0` may be
/// null to start from the origin projected onto the box. `options` may be
/// null for the defaults.
///
/// Returns `Ok` or `NotConverged` with a report in `*out`; on any other code
/// `*out` is left untouched.
///
/// # Safety
/// `problem` must be live, a non-null `x0` must hold `dim` values and `out`
/// must be valid.
#[no_mangle]
pub unsafe extern "C" fn lc_solve_apmm(
    problem: *const LcProblem,
    x0: *const f64,
    fstar: f64,
    options: *const LcApmmOptions,
    out: *mut *mut LcReport,
) -> LcStatus {
    guard(|| {
        let p = problem.as_ref().ok_or_else(|| null("problem"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let opts = options.as_ref().copied().unwrap_or_else(|| lc_apmm_options_default());
        let fstar = if fstar.is_nan() {
            p.inner
                .known_fstar
                .ok_or_else(|| invalid("no optimal value given and none recorded on the problem"))?
        } else {
            fstar
        };
        let dim = p.inner.dim();
        let x0 = if x0.is_null() {
            vec![0.0; dim]
        } else {
            slice(x0, dim, "x0")?.to_vec()
        };
        let cfg = ApmmConfig {
            schedule: if opts.accelerated != 0 {
                AccelSchedule::Nesterov
            } else {
                AccelSchedule::Constant
            },
            policy: if opts.bundle == 0 {
                LocalizerPolicy::FullHistory
            } else {
                LocalizerPolicy::LimitedMemory(opts.bundle)
            },
            eps: opts.eps,
            max_iters: opts.max_iters,
        };
        let run = p.inner.fresh_copy();
        let sol = apmm_solve(&run, &x0, fstar, &cfg)?;
        finish(&run, sol, out)
    })
}

unsafe fn level_config(options: *const LcLevelOptions, secant: bool) -> Result<LevelConfig, Failure> {
    let o = options.as_ref().copied().unwrap_or_else(|| {
        if secant {
            lc_secant_options_default()
        } else {
            lc_fixed_point_options_default()
        }
    });
    let mut cfg = if secant {
        LevelConfig::secant(o.alpha, o.beta, o.nu, o.eps)?
    } else {
        LevelConfig::fixed_point(o.alpha, o.beta, o.nu, o.eps)?
    };
    cfg.max_outer = (o.max_outer > 0).then_some(o.max_outer);
    Ok(cfg)
}

unsafe fn solve_level(
    problem: *const LcProblem,
    options: *const LcLevelOptions,
    out: *mut *mut LcReport,
    secant: bool,
) -> LcStatus {
    guard(|| {
        let p = problem.as_ref().ok_or_else(|| null("problem"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let cfg = level_config(options, secant)?;
        let run = p.inner.fresh_copy();
        let sol = if secant {
            secant_solve(&run, &cfg)?
        } else {
            fixed_point_solve(&run, &cfg)?
        };
        finish(&run, sol, out)
    })
}

/// Inexact fixed-point level-set method; needs no optimal value. `options`
/// may be null for the defaults. Status codes are as for [`lc_solve_apmm`].
///
/// # Safety
/// `problem` must be live and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn lc_solve_fixed_point(
    problem: *const LcProblem,
    options: *const LcLevelOptions,
    out: *mut *mut LcReport,
) -> LcStatus {
    solve_level(problem, options, out, false)
}

/// Truncated secant level-set method; needs `beta` in (1/2, 1].
///
/// # Safety
/// `problem` must be live and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn lc_solve_secant(
    problem: *const LcProblem,
    options: *const LcLevelOptions,
    out: *mut *mut LcReport,
) -> LcStatus {
    solve_level(problem, options, out, true)
}

/// Nonzero when the run met its tolerance.
///
/// # Safety
/// `report` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn lc_report_converged(report: *const LcReport) -> c_int {
    report
        .as_ref()
        .map_or(0, |r| (r.status == ExitStatus::Converged) as c_int)
}

/// # Safety
/// `report` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn lc_report_iterations(report: *const LcReport) -> usize {
    report.as_ref().map_or(0, |r| r.iterations)
}

/// Calls of the composite oracle, one per evaluation of all pieces.
///
/// # Safety
/// `report` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn lc_report_composite_evals(report: *const LcReport) -> u64 {
    report.as_ref().map_or(0, |r| r.composite_evals)
}

/// Subgradient evaluations summed over the objective and all constraints.
///
/// # Safety
/// `report` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn lc_report_gradient_evals(report: *const LcReport) -> u64 {
    report.as_ref().map_or(0, |r| r.gradient_evals)
}

/// Objective at the returned point; NaN for a null handle.
///
/// # Safety
/// `report` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn lc_report_objective(report: *const LcReport) -> f64 {
    report.as_ref().map_or(f64::NAN, |r| r.objective)
}

/// Largest constraint violation at the returned point; NaN for a null handle.
///
/// # Safety
/// `report` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn lc_report_violation(report: *const LcReport) -> f64 {
    report.as_ref().map_or(f64::NAN, |r| r.violation)
}

/// Length of the returned point.
///
/// # Safety
/// `report` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn lc_report_dim(report: *const LcReport) -> usize {
    report.as_ref().map_or(0, |r| r.x.len())
}

/// Copies the returned point into `buf`, which must hold `len >= dim` values.
///
/// # Safety
/// `report` must be live and `buf` must hold `len` writable values.
#[no_mangle]
pub unsafe extern "C" fn lc_report_solution(report: *const LcReport, buf: *mut f64, len: usize) -> LcStatus {
    guard(|| {
        let r = report.as_ref().ok_or_else(|| null("report"))?;
        if buf.is_null() {
            return Err(null("buf"));
        }
        if len < r.x.len() {
            return Err(invalid(format!("buffer holds {len} values, need {}", r.x.len())));
        }
        ptr::copy_nonoverlapping(r.x.as_ptr(), buf, r.x.len());
        Ok(LcStatus::Ok)
    })
}

/// Solver name, e.g. `"apl-secant"`. Owned by the report.
///
/// # Safety
/// `report` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn lc_report_algorithm(report: *const LcReport) -> *const c_char {
    report.as_ref().map_or(ptr::null(), |r| r.algorithm.as_ptr())
}

/// Stop reason for unconverged runs, empty otherwise. Owned by the report.
///
/// # Safety
/// `report` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn lc_report_message(report: *const LcReport) -> *const c_char {
    report.as_ref().map_or(ptr::null(), |r| r.message.as_ptr())
}

/// Convergence trace as CSV text with a header row. Owned by the report.
///
/// # Safety
/// `report` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn lc_report_trace_csv(report: *const LcReport) -> *const c_char {
    report.as_ref().map_or(ptr::null(), |r| r.trace_csv.as_ptr())
}

/// Releases a report. Null is ignored.
///
/// # Safety
/// `report` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn lc_report_free(report: *mut LcReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}
