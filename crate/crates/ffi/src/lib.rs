//! C ABI over the surfasp solver suite.
//!
//! Every fallible function returns a [`SurfaspStatus`]; on failure a message
//! describing the error is kept per thread and can be fetched with
//! [`surfasp_last_error_message`]. Handles are opaque and must be released
//! with their matching `_free` function. Enumerations passed in from C must
//! hold one of the listed values.
//!
//! # Safety
//!
//! Pointer arguments must be null or valid for the access described by the
//! function; handles must come from this library and not be used after free.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use surfasp::assembly::Discretization;
use surfasp::harness::{solve_level, DataConvention, ExperimentConfig, PrecondKind, SurfaceKind};
use surfasp::mesh::{build_hierarchy, MeshHierarchy};
use surfasp::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SurfaspStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidMesh = 3,
    Projection = 4,
    NumericalBreakdown = 5,
    Io = 6,
    BufferTooSmall = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SurfaspSurface {
    /// Torus with major radius 2 and tube radius 0.5 in R^3.
    Torus = 0,
    /// Unit 3-sphere in R^4.
    S3 = 1,
    /// Unit sphere in R^3.
    Sphere2 = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SurfaspDiscretization {
    P1 = 0,
    Cr = 1,
    Dg = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SurfaspPreconditioner {
    FaspAdditive = 0,
    FaspMultiplicative = 1,
    TwoLevelAdditive = 2,
    TwoLevelMultiplicative = 3,
    Jacobi = 4,
}

/// Parameters of a solve on the finest level of a hierarchy.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SurfaspSolveOptions {
    pub discretization: SurfaspDiscretization,
    pub preconditioner: SurfaspPreconditioner,
    /// Reaction coefficient, 0 or positive.
    pub c: f64,
    /// DG penalty; NaN selects the default for the surface dimension.
    pub alpha: f64,
    /// Relative residual tolerance.
    pub tol: f64,
    pub max_iterations: usize,
}

/// Summary of a finished solve.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct SurfaspReport {
    pub iterations: usize,
    pub final_residual: f64,
    /// L2 error against the exact solution; NaN when none is known.
    pub l2_error: f64,
    pub converged: bool,
    pub num_dofs: usize,
}

/// Opaque nested mesh hierarchy.
pub struct SurfaspHierarchy {
    surface: SurfaceKind,
    inner: MeshHierarchy,
}

/// Opaque discrete solution vector.
pub struct SurfaspSolution {
    values: Vec<f64>,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(message: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = message);
}

fn status_of(e: &Error) -> SurfaspStatus {
    match e {
        Error::Domain(_) | Error::InvalidArgument(_) | Error::DimensionMismatch { .. } | Error::NotCoercive { .. } => {
            SurfaspStatus::InvalidArgument
        }
        Error::Projection { .. } | Error::VertexProjection { .. } => SurfaspStatus::Projection,
        Error::NonManifold { .. }
        | Error::DegenerateCell(_)
        | Error::DegenerateFacet(_)
        | Error::IsolatedVertex(_)
        | Error::InvalidMesh(_)
        | Error::Parse { .. } => SurfaspStatus::InvalidMesh,
        Error::NonPositivePivot { .. } | Error::NonPositiveDiagonal { .. } | Error::NotPositiveDefinite { .. } => {
            SurfaspStatus::NumericalBreakdown
        }
        Error::Io(_) => SurfaspStatus::Io,
    }
}

/// Runs `f`, translating errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), (SurfaspStatus, String)>) -> SurfaspStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SurfaspStatus::Ok,
        Ok(Err((status, message))) => {
            set_error(message);
            status
        }
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {message}"));
            SurfaspStatus::Panic
        }
    }
}

fn core<T>(r: surfasp::Result<T>) -> Result<T, (SurfaspStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(name: &str) -> (SurfaspStatus, String) {
    (SurfaspStatus::NullPointer, format!("{name} is null"))
}

fn invalid(message: String) -> (SurfaspStatus, String) {
    (SurfaspStatus::InvalidArgument, message)
}

unsafe fn deref<'a, T>(p: *const T, name: &str) -> Result<&'a T, (SurfaspStatus, String)> {
    p.as_ref().ok_or_else(|| null(name))
}

impl From<SurfaspSurface> for SurfaceKind {
    fn from(s: SurfaspSurface) -> Self {
        match s {
            SurfaspSurface::Torus => SurfaceKind::Torus,
            SurfaspSurface::S3 => SurfaceKind::S3,
            SurfaspSurface::Sphere2 => SurfaceKind::Sphere2,
        }
    }
}

impl From<SurfaspDiscretization> for Discretization {
    fn from(d: SurfaspDiscretization) -> Self {
        match d {
            SurfaspDiscretization::P1 => Discretization::P1,
            SurfaspDiscretization::Cr => Discretization::Cr,
            SurfaspDiscretization::Dg => Discretization::Dg,
        }
    }
}

impl From<SurfaspPreconditioner> for PrecondKind {
    fn from(p: SurfaspPreconditioner) -> Self {
        match p {
            SurfaspPreconditioner::FaspAdditive => PrecondKind::FaspAdditive,
            SurfaspPreconditioner::FaspMultiplicative => PrecondKind::FaspMultiplicative,
            SurfaspPreconditioner::TwoLevelAdditive => PrecondKind::TwoLevelAdditive,
            SurfaspPreconditioner::TwoLevelMultiplicative => PrecondKind::TwoLevelMultiplicative,
            SurfaspPreconditioner::Jacobi => PrecondKind::Jacobi,
        }
    }
}

/// Copies the calling thread's last error message into `buffer` as a
/// NUL-terminated string and returns the number of bytes required, including
/// the terminator. Nothing is written when `buffer` is null or `len` is too
/// small.
#[no_mangle]
pub unsafe extern "C" fn surfasp_last_error_message(buffer: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let message = e.borrow();
        let needed = message.len() + 1;
        if !buffer.is_null() && len >= needed {
            ptr::copy_nonoverlapping(message.as_ptr(), buffer.cast::<u8>(), message.len());
            *buffer.add(message.len()) = 0;
        }
        needed
    })
}

/// Default options: P1 with the multiplicative FASP preconditioner, c = 1,
/// tolerance 1e-6 and at most 2000 iterations.
#[no_mangle]
pub extern "C" fn surfasp_solve_options_default() -> SurfaspSolveOptions {
    SurfaspSolveOptions {
        discretization: SurfaspDiscretization::P1,
        preconditioner: SurfaspPreconditioner::FaspMultiplicative,
        c: 1.0,
        alpha: f64::NAN,
        tol: 1e-6,
        max_iterations: 2000,
    }
}

/// Builds the hierarchy of `levels` uniform refinements of the initial mesh
/// of `surface`. On success `*out` owns the new handle.
#[no_mangle]
pub unsafe extern "C" fn surfasp_hierarchy_new(
    surface: SurfaspSurface,
    levels: usize,
    out: *mut *mut SurfaspHierarchy,
) -> SurfaspStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let kind = SurfaceKind::from(surface);
        if levels > kind.default_max_level() {
            return Err(invalid(format!(
                "{levels} levels exceed the limit of {} for {kind}",
                kind.default_max_level()
            )));
        }
        let inner = core(build_hierarchy(kind.surface(), kind.initial_mesh(), levels))?;
        *out = Box::into_raw(Box::new(SurfaspHierarchy { surface: kind, inner }));
        Ok(())
    })
}

/// Releases a hierarchy; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn surfasp_hierarchy_free(hierarchy: *mut SurfaspHierarchy) {
    if !hierarchy.is_null() {
        drop(Box::from_raw(hierarchy));
    }
}

/// Number of levels, i.e. refinements plus one; 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn surfasp_hierarchy_num_levels(hierarchy: *const SurfaspHierarchy) -> usize {
    hierarchy.as_ref().map_or(0, |h| h.inner.num_levels())
}

fn level_of(h: &SurfaspHierarchy, level: usize) -> Result<(), (SurfaspStatus, String)> {
    if level < h.inner.num_levels() {
        Ok(())
    } else {
        Err(invalid(format!(
            "level {level} out of range 0..{}",
            h.inner.num_levels()
        )))
    }
}

/// Cell and vertex counts of the mesh on `level`.
#[no_mangle]
pub unsafe extern "C" fn surfasp_hierarchy_mesh_size(
    hierarchy: *const SurfaspHierarchy,
    level: usize,
    num_cells: *mut usize,
    num_vertices: *mut usize,
) -> SurfaspStatus {
    guard(|| {
        let h = deref(hierarchy, "hierarchy")?;
        level_of(h, level)?;
        let mesh = h.inner.true_mesh(level);
        if !num_cells.is_null() {
            *num_cells = mesh.num_cells();
        }
        if !num_vertices.is_null() {
            *num_vertices = mesh.num_vertices();
        }
        Ok(())
    })
}

/// Writes the mesh of `level` in the text mesh format. `reference` selects
/// the flat reference mesh instead of the projected one.
#[no_mangle]
pub unsafe extern "C" fn surfasp_hierarchy_write_mesh(
    hierarchy: *const SurfaspHierarchy,
    level: usize,
    reference: bool,
    path: *const c_char,
) -> SurfaspStatus {
    guard(|| {
        let h = deref(hierarchy, "hierarchy")?;
        level_of(h, level)?;
        if path.is_null() {
            return Err(null("path"));
        }
        let path = CStr::from_ptr(path)
            .to_str()
            .map_err(|e| invalid(format!("path is not UTF-8: {e}")))?;
        let mesh = if reference {
            h.inner.reference(level)
        } else {
            h.inner.true_mesh(level)
        };
        let file = core(File::create(path).map_err(Error::from))?;
        let mut w = BufWriter::new(file);
        core(mesh.write_text(&mut w))?;
        core(w.flush().map_err(Error::from))
    })
}

/// Solves the model problem on the finest level of `hierarchy`. The report
/// is written to `*report`; when `solution` is non-null `*solution` receives
/// a new handle to the coefficient vector. A solve that stops at the
/// iteration limit still succeeds with `converged` false.
#[no_mangle]
pub unsafe extern "C" fn surfasp_solve(
    hierarchy: *const SurfaspHierarchy,
    options: *const SurfaspSolveOptions,
    report: *mut SurfaspReport,
    solution: *mut *mut SurfaspSolution,
) -> SurfaspStatus {
    guard(|| {
        let h = deref(hierarchy, "hierarchy")?;
        let o = deref(options, "options")?;
        if report.is_null() {
            return Err(null("report"));
        }
        if o.c.is_nan() || o.c < 0.0 || o.tol.is_nan() || o.tol <= 0.0 || o.max_iterations == 0 {
            return Err(invalid("need c >= 0, tol > 0 and max_iterations > 0".into()));
        }
        let mut cfg = ExperimentConfig::new(h.surface, o.discretization.into(), o.c, h.inner.finest());
        cfg.alpha = (!o.alpha.is_nan()).then_some(o.alpha);
        cfg.tol = o.tol;
        cfg.max_iterations = o.max_iterations;
        cfg.data = DataConvention::Ambient;
        let solved = core(solve_level(&cfg, &h.inner, None, o.preconditioner.into()))?;
        *report = SurfaspReport {
            iterations: solved.report.iterations,
            final_residual: solved.report.final_residual(),
            l2_error: solved.l2_error.unwrap_or(f64::NAN),
            converged: solved.report.converged,
            num_dofs: solved.solution.len(),
        };
        if !solution.is_null() {
            *solution = Box::into_raw(Box::new(SurfaspSolution {
                values: solved.solution,
            }));
        }
        Ok(())
    })
}

/// Number of coefficients; 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn surfasp_solution_len(solution: *const SurfaspSolution) -> usize {
    solution.as_ref().map_or(0, |s| s.values.len())
}

/// Copies the coefficients into `buffer`, which must hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn surfasp_solution_copy(
    solution: *const SurfaspSolution,
    buffer: *mut f64,
    len: usize,
) -> SurfaspStatus {
    guard(|| {
        let s = deref(solution, "solution")?;
        if buffer.is_null() {
            return Err(null("buffer"));
        }
        if len < s.values.len() {
            return Err((
                SurfaspStatus::BufferTooSmall,
                format!("buffer holds {len} values, {} needed", s.values.len()),
            ));
        }
        ptr::copy_nonoverlapping(s.values.as_ptr(), buffer, s.values.len());
        Ok(())
    })
}

/// Releases a solution; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn surfasp_solution_free(solution: *mut SurfaspSolution) {
    if !solution.is_null() {
        drop(Box::from_raw(solution));
    }
}

/// Signed distance of the point `x` (of length `dim`, the ambient
/// dimension of `surface`) to the surface; negative inside.
#[no_mangle]
pub unsafe extern "C" fn surfasp_signed_distance(
    surface: SurfaspSurface,
    x: *const f64,
    dim: usize,
    out: *mut f64,
) -> SurfaspStatus {
    guard(|| {
        if x.is_null() {
            return Err(null("x"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let point = std::slice::from_raw_parts(x, dim);
        *out = core(SurfaceKind::from(surface).surface().signed_distance(point))?;
        Ok(())
    })
}
