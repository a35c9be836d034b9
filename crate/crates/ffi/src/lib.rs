//! C interface to `trimquad`.
//!
//! Problems and matrices are opaque handles owned by the caller and released
//! with their `_free` function. Every fallible call returns a [`TqStatus`];
//! on failure the message is kept per thread and can be read with
//! [`tq_last_error_message`]. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, c_void, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::sync::Arc;

use trimquad::assembly::{assemble, CoefficientField, FormOptions, SparseMatrix, Strategy};
use trimquad::projection::{benchmark_target, project, ProjectionProblem, Target};
use trimquad::splinecore::TensorBasis2D;
use trimquad::trimming::{case_domain, CaseName, TrimConfiguration, TrimmedDomain};
use trimquad::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TqStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// Trimming geometry could not be processed.
    Geometry = 3,
    /// Quadrature construction failed.
    Quadrature = 4,
    /// Matrix not positive definite or too ill-conditioned.
    Solver = 5,
    /// Buffer too small.
    BufferTooSmall = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TqCase {
    Line = 0,
    Circle = 1,
    Corner = 2,
    Untrimmed = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TqStrategy {
    Reference = 0,
    Wq = 1,
    Hybrid = 2,
    Dwq = 3,
}

impl From<TqStrategy> for Strategy {
    fn from(s: TqStrategy) -> Self {
        match s {
            TqStrategy::Reference => Strategy::Reference,
            TqStrategy::Wq => Strategy::Wq,
            TqStrategy::Hybrid => Strategy::Hybrid,
            TqStrategy::Dwq => Strategy::Dwq,
        }
    }
}

/// Summary of one L2 projection.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TqProjection {
    /// Relative L2 error on the valid domain.
    pub l2_rel: f64,
    /// Condition estimate of the diagonally scaled mass matrix.
    pub condition: f64,
    pub relative_residual: f64,
    /// Number of retained degrees of freedom.
    pub dofs: usize,
}

/// Target function `f(x, y, user_data)` for [`tq_project_fn`].
pub type TqTarget = Option<unsafe extern "C" fn(x: f64, y: f64, user_data: *mut c_void) -> f64>;

/// A trimmed spline space of one degree on a uniform mesh.
pub struct TqProblem {
    config: TrimConfiguration,
}

/// A mass matrix in compressed sparse row form over the retained dofs.
pub struct TqMatrix {
    matrix: SparseMatrix,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

fn status_of(e: &Error) -> TqStatus {
    match e {
        Error::Domain { .. }
        | Error::InvalidKnotVector(_)
        | Error::Multiplicity { .. }
        | Error::NotNested
        | Error::NotBreakpoint(_)
        | Error::Dimension(_)
        | Error::Config(_)
        | Error::Io(_) => TqStatus::InvalidArgument,
        Error::UnsupportedTrim(_) | Error::Decomposition { .. } | Error::NegativeJacobian { .. } | Error::ZeroNorm => {
            TqStatus::Geometry
        }
        Error::ZeroPoints | Error::MomentFit { .. } => TqStatus::Quadrature,
        Error::NotSpd { .. } | Error::IllConditioned { .. } => TqStatus::Solver,
    }
}

/// Runs `f`, recording errors and turning panics into [`TqStatus::Panic`].
fn guard(f: impl FnOnce() -> Result<(), (TqStatus, String)>) -> TqStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            TqStatus::Ok
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
            TqStatus::Panic
        }
    }
}

fn lib<T>(r: trimquad::Result<T>) -> Result<T, (TqStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(what: &str) -> (TqStatus, String) {
    (TqStatus::NullPointer, format!("{what} is null"))
}

/// Builds the space of degree `degree` on an `elements` x `elements` mesh of
/// the unit square, trimmed by `case`.
///
/// # Safety
/// `out` must be valid for writing one pointer.
#[no_mangle]
pub unsafe extern "C" fn tq_problem_new(case: TqCase, degree: usize, elements: usize, out: *mut *mut TqProblem) -> TqStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        if !(1..=6).contains(&degree) || elements == 0 {
            return Err((TqStatus::InvalidArgument, format!("need 1 <= degree <= 6 and elements > 0, got {degree}, {elements}")));
        }
        let domain = match case {
            TqCase::Line => case_domain(CaseName::Line),
            TqCase::Circle => case_domain(CaseName::Circle),
            TqCase::Corner => case_domain(CaseName::Corner),
            TqCase::Untrimmed => TrimmedDomain::untrimmed(),
        };
        let basis = lib(TensorBasis2D::open_uniform(degree, elements))?;
        let config = lib(TrimConfiguration::new(&basis, &domain))?;
        *out = Box::into_raw(Box::new(TqProblem { config }));
        Ok(())
    })
}

/// # Safety
/// `problem` must come from [`tq_problem_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn tq_problem_free(problem: *mut TqProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// Forms the mass matrix of `problem` with `strategy`.
///
/// # Safety
/// `problem` must be a live handle and `out` valid for writing one pointer.
#[no_mangle]
pub unsafe extern "C" fn tq_assemble(problem: *const TqProblem, strategy: TqStrategy, out: *mut *mut TqMatrix) -> TqStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let problem = problem.as_ref().ok_or_else(|| null("problem"))?;
        let matrix = lib(assemble(strategy.into(), &problem.config, &CoefficientField::identity(), FormOptions::default()))?;
        *out = Box::into_raw(Box::new(TqMatrix { matrix }));
        Ok(())
    })
}

/// Number of rows, or 0 for a null handle.
///
/// # Safety
/// `matrix` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tq_matrix_dim(matrix: *const TqMatrix) -> usize {
    matrix.as_ref().map_or(0, |m| m.matrix.dim())
}

/// Number of stored entries, or 0 for a null handle.
///
/// # Safety
/// `matrix` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tq_matrix_nnz(matrix: *const TqMatrix) -> usize {
    matrix.as_ref().map_or(0, |m| m.matrix.nnz())
}

/// Copies the CSR arrays into caller buffers. `row_ptr` needs `dim + 1`
/// entries, `cols` and `vals` need `nnz`, `dofs` (global index of each row,
/// may be null) needs `dim`. Buffer lengths are passed so that short buffers
/// are reported instead of overrun.
///
/// # Safety
/// Each non-null buffer must be valid for writing its stated length.
#[no_mangle]
pub unsafe extern "C" fn tq_matrix_csr(
    matrix: *const TqMatrix,
    row_ptr: *mut usize,
    row_ptr_len: usize,
    cols: *mut usize,
    vals: *mut f64,
    nnz_len: usize,
    dofs: *mut usize,
    dofs_len: usize,
) -> TqStatus {
    guard(|| {
        let m = &matrix.as_ref().ok_or_else(|| null("matrix"))?.matrix;
        if row_ptr.is_null() || cols.is_null() || vals.is_null() {
            return Err(null("output buffer"));
        }
        let short = row_ptr_len < m.dim() + 1 || nnz_len < m.nnz() || (!dofs.is_null() && dofs_len < m.dim());
        if short {
            return Err((TqStatus::BufferTooSmall, format!("need dim + 1 = {} and nnz = {}", m.dim() + 1, m.nnz())));
        }
        ptr::copy_nonoverlapping(m.row_ptr().as_ptr(), row_ptr, m.dim() + 1);
        ptr::copy_nonoverlapping(m.col_indices().as_ptr(), cols, m.nnz());
        ptr::copy_nonoverlapping(m.values().as_ptr(), vals, m.nnz());
        if !dofs.is_null() {
            ptr::copy_nonoverlapping(m.dofs().as_ptr(), dofs, m.dim());
        }
        Ok(())
    })
}

/// Frobenius norm of `a - b` for matrices on the same space.
///
/// # Safety
/// `a` and `b` must be live handles and `out` valid for writing.
#[no_mangle]
pub unsafe extern "C" fn tq_matrix_deviation(a: *const TqMatrix, b: *const TqMatrix, out: *mut f64) -> TqStatus {
    guard(|| {
        let a = a.as_ref().ok_or_else(|| null("a"))?;
        let b = b.as_ref().ok_or_else(|| null("b"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = lib(a.matrix.deviation(&b.matrix))?;
        Ok(())
    })
}

/// # Safety
/// `matrix` must come from [`tq_assemble`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn tq_matrix_free(matrix: *mut TqMatrix) {
    if !matrix.is_null() {
        drop(Box::from_raw(matrix));
    }
}

fn run_projection(problem: &TqProblem, strategy: TqStrategy, target: Target, parallel: bool) -> Result<TqProjection, (TqStatus, String)> {
    let problem = ProjectionProblem::new(target, problem.config.clone(), strategy.into());
    let r = lib(project(&problem, FormOptions { parallel, ..FormOptions::default() }))?;
    Ok(TqProjection {
        l2_rel: r.l2_rel,
        condition: r.solve.condition,
        relative_residual: r.solve.relative_residual,
        dofs: r.coeffs.len(),
    })
}

/// Projects `sin(2x) cos(3y)` onto the space of `problem`.
///
/// # Safety
/// `problem` must be a live handle and `out` valid for writing.
#[no_mangle]
pub unsafe extern "C" fn tq_project(problem: *const TqProblem, strategy: TqStrategy, out: *mut TqProjection) -> TqStatus {
    guard(|| {
        let problem = problem.as_ref().ok_or_else(|| null("problem"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = run_projection(problem, strategy, benchmark_target(), true)?;
        Ok(())
    })
}

struct Callback {
    f: unsafe extern "C" fn(f64, f64, *mut c_void) -> f64,
    data: *mut c_void,
}

impl Callback {
    fn call(&self, x: f64, y: f64) -> f64 {
        unsafe { (self.f)(x, y, self.data) }
    }
}

// Only used from the calling thread: the projection runs serially.
unsafe impl Send for Callback {}
unsafe impl Sync for Callback {}

/// Projects a caller-supplied function. The callback is invoked on the
/// calling thread only and must not unwind.
///
/// # Safety
/// `problem` must be a live handle, `out` valid for writing, and `target`
/// safe to call with `user_data`.
#[no_mangle]
pub unsafe extern "C" fn tq_project_fn(
    problem: *const TqProblem,
    strategy: TqStrategy,
    target: TqTarget,
    user_data: *mut c_void,
    out: *mut TqProjection,
) -> TqStatus {
    guard(|| {
        let problem = problem.as_ref().ok_or_else(|| null("problem"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let cb = Callback { f: target.ok_or_else(|| null("target"))?, data: user_data };
        let target: Target = Arc::new(move |x| cb.call(x[0], x[1]));
        *out = run_projection(problem, strategy, target, false)?;
        Ok(())
    })
}

/// Copies the message of the last failed call on this thread into `buf`,
/// NUL-terminated and truncated to `len`. Returns the full message length
/// without the terminator.
///
/// # Safety
/// `buf` must be null or valid for writing `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn tq_last_error_message(buf: *mut c_char, len: usize) -> usize {
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

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn tq_version() -> *const c_char {
    static VERSION: &CStr = match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
        Ok(v) => v,
        Err(_) => panic!("version contains a NUL byte"),
    };
    VERSION.as_ptr()
}
