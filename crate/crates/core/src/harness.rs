//! Experiment driver: builds a hierarchy, assembles the problem on each level,
//! solves it with the requested preconditioners and tabulates iteration
//! counts, residuals and discretization errors.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use crate::assembly::{assemble_operator, AssembledProblem, Discretization, DofMap, LoadRule};
use crate::error::{Error, Result};
use crate::geometry::ImplicitSurface;
use crate::krylov::{lanczos_extremes, pcg_solve, KernelSpace, PcgOptions, SolveReport, SpectralEstimate};
use crate::mesh::{
    build_hierarchy, initial_mesh_s3, initial_mesh_sphere2, initial_mesh_torus, MeshHierarchy, SurfaceMesh,
};
use crate::precond::{
    fasp_surface_with, two_level_additive, two_level_multiplicative, KernelProjected, Multilevel, MultilevelKind,
    Preconditioner, Smoother, DEFAULT_SMOOTHING_STEPS, FASP_SMOOTHING_STEPS,
};
use crate::simplex::QuadratureRule;
use crate::transfer::{inclusion_cr, inclusion_dg, TransferOperator};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SurfaceKind {
    Torus,
    S3,
    Sphere2,
}

impl SurfaceKind {
    pub fn surface(self) -> ImplicitSurface {
        match self {
            SurfaceKind::Torus => ImplicitSurface::STANDARD_TORUS,
            SurfaceKind::S3 => ImplicitSurface::Sphere3,
            SurfaceKind::Sphere2 => ImplicitSurface::Sphere2,
        }
    }

    pub fn initial_mesh(self) -> SurfaceMesh {
        match self {
            SurfaceKind::Torus => initial_mesh_torus(),
            SurfaceKind::S3 => initial_mesh_s3(),
            SurfaceKind::Sphere2 => initial_mesh_sphere2(),
        }
    }

    /// Refinements allowed by default (196,608 torus cells, 65,536 on S³).
    pub fn default_max_level(self) -> usize {
        match self {
            SurfaceKind::Torus => 5,
            SurfaceKind::S3 => 4,
            SurfaceKind::Sphere2 => 7,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SurfaceKind::Torus => "torus",
            SurfaceKind::S3 => "s3",
            SurfaceKind::Sphere2 => "sphere2",
        }
    }
}

impl FromStr for SurfaceKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "torus" => Ok(SurfaceKind::Torus),
            "s3" => Ok(SurfaceKind::S3),
            "sphere2" => Ok(SurfaceKind::Sphere2),
            _ => Err(Error::InvalidArgument(format!("unknown surface '{s}'"))),
        }
    }
}

impl fmt::Display for SurfaceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Discretization {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "p1" => Ok(Discretization::P1),
            "cr" => Ok(Discretization::Cr),
            "dg" => Ok(Discretization::Dg),
            _ => Err(Error::InvalidArgument(format!("unknown discretization '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PrecondKind {
    FaspAdditive,
    FaspMultiplicative,
    TwoLevelAdditive,
    TwoLevelMultiplicative,
    Jacobi,
}

impl PrecondKind {
    pub fn name(self) -> &'static str {
        match self {
            PrecondKind::FaspAdditive => "fasp-add",
            PrecondKind::FaspMultiplicative => "fasp-mul",
            PrecondKind::TwoLevelAdditive => "two-add",
            PrecondKind::TwoLevelMultiplicative => "two-mul",
            PrecondKind::Jacobi => "jacobi",
        }
    }
}

impl FromStr for PrecondKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fasp-add" => Ok(PrecondKind::FaspAdditive),
            "fasp-mul" => Ok(PrecondKind::FaspMultiplicative),
            "two-add" => Ok(PrecondKind::TwoLevelAdditive),
            "two-mul" => Ok(PrecondKind::TwoLevelMultiplicative),
            "jacobi" => Ok(PrecondKind::Jacobi),
            _ => Err(Error::InvalidArgument(format!("unknown preconditioner '{s}'"))),
        }
    }
}

impl fmt::Display for PrecondKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// How data enter and errors are measured. The exact data used here are
/// ambient polynomials, so they are defined off the surface as well.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DataConvention {
    /// One-point load rule at cell barycenters and errors against the
    /// ambient extension of `u` on the discrete surface.
    #[default]
    Ambient,
    /// Degree-2 load rule of `f∘Φ` and errors against `u∘Φ`.
    Lifted,
}

impl DataConvention {
    pub fn load_rule(self) -> LoadRule {
        match self {
            DataConvention::Ambient => LoadRule::Centroid,
            DataConvention::Lifted => LoadRule::Projected,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub surface: SurfaceKind,
    pub discretization: Discretization,
    pub c: f64,
    /// Solves run on refinement levels `1..=levels`.
    pub levels: usize,
    pub preconditioners: Vec<PrecondKind>,
    /// Penalty for DG; `None` picks the dimension default.
    pub alpha: Option<f64>,
    pub tol: f64,
    pub max_iterations: usize,
    /// Record wall times; when off the `seconds` column is zero so that the
    /// CSV is byte-for-byte reproducible.
    pub timing: bool,
    /// Lifts the default level cap.
    pub allow_large: bool,
    pub data: DataConvention,
    /// Gauss-Seidel sweeps before and after each coarse correction.
    pub smoothing_steps: usize,
}

impl ExperimentConfig {
    pub fn new(surface: SurfaceKind, discretization: Discretization, c: f64, levels: usize) -> Self {
        let preconditioners = match discretization {
            Discretization::P1 => vec![PrecondKind::FaspMultiplicative],
            _ => vec![PrecondKind::TwoLevelMultiplicative],
        };
        Self {
            surface,
            discretization,
            c,
            levels,
            preconditioners,
            alpha: None,
            tol: 1e-6,
            max_iterations: 2000,
            timing: true,
            allow_large: false,
            data: DataConvention::default(),
            smoothing_steps: FASP_SMOOTHING_STEPS,
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
            .unwrap_or_else(|| Discretization::default_alpha(self.surface.surface().dim()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.levels < 1 {
            return Err(Error::InvalidArgument("levels must be at least 1".into()));
        }
        if !self.allow_large && self.levels > self.surface.default_max_level() {
            return Err(Error::InvalidArgument(format!(
                "{} levels exceed the default cap of {} on {}",
                self.levels,
                self.surface.default_max_level(),
                self.surface
            )));
        }
        if self.c != 0.0 && self.c != 1.0 {
            return Err(Error::InvalidArgument(format!("c must be 0 or 1, got {}", self.c)));
        }
        if self.discretization == Discretization::Dg && !(self.alpha() > 0.0) {
            return Err(Error::InvalidArgument("alpha must be positive for DG".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidArgument("tol must be positive".into()));
        }
        for p in &self.preconditioners {
            compatible(self.discretization, *p)?;
        }
        Ok(())
    }
}

fn compatible(disc: Discretization, p: PrecondKind) -> Result<()> {
    let ok = match p {
        PrecondKind::Jacobi => true,
        PrecondKind::FaspAdditive | PrecondKind::FaspMultiplicative => disc == Discretization::P1,
        PrecondKind::TwoLevelAdditive | PrecondKind::TwoLevelMultiplicative => disc != Discretization::P1,
    };
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "{} does not apply to {}",
            p,
            disc.name()
        )))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub num_cells: usize,
    pub preconditioner: String,
    pub iterations: usize,
    pub residual: f64,
    pub l2_error: Option<f64>,
    pub eoc: Option<f64>,
    pub kappa: Option<f64>,
    pub seconds: f64,
    pub converged: bool,
}

/// `u(x) = x₁ + 2x₂ + 3x₃ + x₄`, an eigenfunction of `-Δ` on S³ with eigenvalue 3.
pub fn exact_solution_s3(x: &[f64]) -> f64 {
    x[0] + 2.0 * x[1] + 3.0 * x[2] + x[3]
}

/// Linear function on S², eigenvalue 2.
pub fn exact_solution_s2(x: &[f64]) -> f64 {
    x[0] + 2.0 * x[1] + 3.0 * x[2]
}

/// The exact solution used on a surface, if one is known.
pub fn exact_solution(surface: SurfaceKind) -> Option<fn(&[f64]) -> f64> {
    match surface {
        SurfaceKind::S3 => Some(exact_solution_s3),
        SurfaceKind::Sphere2 => Some(exact_solution_s2),
        SurfaceKind::Torus => None,
    }
}

/// Right-hand side of `-Δu + cu = f`. On the spheres it matches the exact
/// solution; on the torus the ambient linear function is used as data.
pub fn right_hand_side(surface: SurfaceKind, c: f64) -> impl Fn(&[f64]) -> f64 {
    move |x: &[f64]| match surface {
        SurfaceKind::S3 => (3.0 + c) * exact_solution_s3(x),
        SurfaceKind::Sphere2 => (2.0 + c) * exact_solution_s2(x),
        SurfaceKind::Torus => x[0] + 2.0 * x[1] + 3.0 * x[2],
    }
}

/// `‖u∘Φ - u_h‖` on the discrete surface by a degree-4 rule on each cell. With
/// `mean_correct` both functions are shifted to zero mean over `mesh` first.
pub fn l2_error<F>(
    mesh: &SurfaceMesh,
    dofmap: &DofMap,
    u_h: &[f64],
    u_exact: F,
    surface: ImplicitSurface,
    mean_correct: bool,
) -> Result<f64>
where
    F: Fn(&[f64]) -> f64,
{
    l2_error_by(
        mesh,
        dofmap,
        u_h,
        |x| Ok(u_exact(&surface.closest_point(x)?)),
        mean_correct,
    )
}

/// As [`l2_error`] but with `u` evaluated directly at the points of the
/// discrete surface, i.e. through an extension of `u` off the surface.
pub fn l2_error_extended<F>(
    mesh: &SurfaceMesh,
    dofmap: &DofMap,
    u_h: &[f64],
    u_ext: F,
    mean_correct: bool,
) -> Result<f64>
where
    F: Fn(&[f64]) -> f64,
{
    l2_error_by(mesh, dofmap, u_h, |x| Ok(u_ext(x)), mean_correct)
}

fn l2_error_by<F>(mesh: &SurfaceMesh, dofmap: &DofMap, u_h: &[f64], eval: F, mean_correct: bool) -> Result<f64>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    if u_h.len() != dofmap.num_dofs() {
        return Err(Error::DimensionMismatch {
            expected: dofmap.num_dofs(),
            found: u_h.len(),
        });
    }
    let rule = QuadratureRule::new(mesh.dim(), 4);
    let amb = mesh.ambient_dim();
    // per quadrature point: weight, exact value, discrete value
    let mut samples = Vec::with_capacity(mesh.num_cells() * rule.weights.len());
    let mut x = vec![0.0; amb];
    for cell in 0..mesh.num_cells() {
        let pts = mesh.cell_points(cell);
        let vol = mesh.cell_volume(cell);
        let dofs = dofmap.cell_dofs(cell);
        for (bary, w) in rule.points.iter().zip(&rule.weights) {
            x.iter_mut().for_each(|v| *v = 0.0);
            for (l, p) in bary.iter().zip(&pts) {
                for k in 0..amb {
                    x[k] += l * p[k];
                }
            }
            let ue = eval(&x)?;
            let uh: f64 = dofmap
                .basis_values(bary)
                .iter()
                .zip(dofs)
                .map(|(phi, d)| phi * u_h[*d])
                .sum();
            samples.push((vol * w, ue, uh));
        }
    }
    let (mut shift_e, mut shift_h) = (0.0, 0.0);
    if mean_correct {
        let area: f64 = samples.iter().map(|s| s.0).sum();
        shift_e = samples.iter().map(|s| s.0 * s.1).sum::<f64>() / area;
        shift_h = samples.iter().map(|s| s.0 * s.2).sum::<f64>() / area;
    }
    let sq: f64 = samples
        .iter()
        .map(|(w, ue, uh)| w * ((ue - shift_e) - (uh - shift_h)).powi(2))
        .sum();
    Ok(sq.sqrt())
}

/// `log₂(e_coarse / e_fine)` for one uniform refinement.
pub fn eoc(e_coarse: f64, e_fine: f64) -> f64 {
    (e_coarse / e_fine).log2()
}

/// Builds the preconditioner `kind` for `problem` on the finest level of
/// `hierarchy`. Multilevel parts always use the `c = 1` auxiliary operators;
/// two-level methods smooth with the `c = 1` operator of the same
/// discretization. For `c = 0` the result is wrapped to respect the kernel.
pub fn build_preconditioner(
    kind: PrecondKind,
    hierarchy: &MeshHierarchy,
    multilevel: Option<Arc<Multilevel>>,
    problem: &AssembledProblem,
    alpha: f64,
    vcycle_steps: usize,
) -> Result<Box<dyn Preconditioner>> {
    let disc = problem.dofmap.kind();
    compatible(disc, kind)?;
    let mesh = hierarchy.true_mesh(hierarchy.finest());
    let fasp = |k| -> Result<_> {
        let ml = match &multilevel {
            Some(m) => m.clone(),
            None => Arc::new(Multilevel::reference_p1(hierarchy)?),
        };
        fasp_surface_with(hierarchy, k, ml, vcycle_steps)
    };
    let a1 = || -> Result<Arc<_>> {
        if problem.c == 1.0 {
            Ok(Arc::new(problem.matrix.clone()))
        } else {
            Ok(Arc::new(assemble_operator(mesh, disc, 1.0, alpha)?))
        }
    };
    let inclusion = || -> TransferOperator {
        match disc {
            Discretization::Cr => inclusion_cr(mesh),
            _ => inclusion_dg(mesh),
        }
    };
    let inner: Box<dyn Preconditioner> = match kind {
        PrecondKind::FaspAdditive => Box::new(fasp(MultilevelKind::Additive)?),
        PrecondKind::FaspMultiplicative => Box::new(fasp(MultilevelKind::Multiplicative)?),
        PrecondKind::Jacobi => Box::new(Smoother::jacobi(a1()?)?),
        PrecondKind::TwoLevelAdditive => Box::new(two_level_additive(
            a1()?,
            inclusion(),
            fasp(MultilevelKind::Multiplicative)?,
        )?),
        PrecondKind::TwoLevelMultiplicative => Box::new(two_level_multiplicative(
            a1()?,
            DEFAULT_SMOOTHING_STEPS,
            inclusion(),
            fasp(MultilevelKind::Multiplicative)?,
        )?),
    };
    match &problem.kernel {
        Some(k) => Ok(Box::new(KernelProjected::new(inner, &problem.mass, k.clone())?)),
        None => Ok(inner),
    }
}

/// The outcome of one solve on one level.
pub struct LevelSolve {
    pub solution: Vec<f64>,
    pub report: SolveReport,
    pub l2_error: Option<f64>,
}

/// Assembles and solves the configured problem on the finest level of
/// `hierarchy` with preconditioner `kind`.
pub fn solve_level(
    config: &ExperimentConfig,
    hierarchy: &MeshHierarchy,
    multilevel: Option<Arc<Multilevel>>,
    kind: PrecondKind,
) -> Result<LevelSolve> {
    let surface = config.surface.surface();
    let mesh = hierarchy.true_mesh(hierarchy.finest());
    let alpha = config.alpha();
    let problem = AssembledProblem::with_load_rule(
        mesh,
        config.discretization,
        config.c,
        alpha,
        right_hand_side(config.surface, config.c),
        surface,
        config.data.load_rule(),
    )?;
    let b = build_preconditioner(kind, hierarchy, multilevel, &problem, alpha, config.smoothing_steps)?;
    let kernel = problem
        .kernel
        .as_ref()
        .map(|k| KernelSpace::new(k, &problem.mass))
        .transpose()?;
    let options = PcgOptions {
        tol: config.tol,
        max_iterations: config.max_iterations,
    };
    let (solution, report) = pcg_solve(&problem.matrix, &b, &problem.load, options, kernel.as_ref())?;
    let mean_correct = config.c == 0.0;
    let l2_error = exact_solution(config.surface)
        .map(|u| match config.data {
            DataConvention::Ambient => l2_error_extended(mesh, &problem.dofmap, &solution, u, mean_correct),
            DataConvention::Lifted => l2_error(mesh, &problem.dofmap, &solution, u, surface, mean_correct),
        })
        .transpose()?;
    Ok(LevelSolve {
        solution,
        report,
        l2_error,
    })
}

/// Runs every configured preconditioner on levels `1..=levels`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    config.validate()?;
    let hierarchy = build_hierarchy(config.surface.surface(), config.surface.initial_mesh(), config.levels)?;
    let mut rows = Vec::new();
    for &kind in &config.preconditioners {
        let mut previous: Option<f64> = None;
        for level in 1..=config.levels {
            let h = hierarchy.truncated(level);
            let diag = |e: Error| Error::InvalidArgument(format!("level {level}, {kind}: {e}"));
            let solved = solve_level(config, &h, None, kind).map_err(diag)?;
            let report = &solved.report;
            let eoc = match (previous, solved.l2_error) {
                (Some(a), Some(b)) => Some(eoc(a, b)),
                _ => None,
            };
            previous = solved.l2_error;
            rows.push(ResultRow {
                num_cells: h.true_mesh(level).num_cells(),
                preconditioner: kind.name().to_string(),
                iterations: report.iterations,
                residual: report.final_residual(),
                l2_error: solved.l2_error,
                eoc,
                kappa: report.ritz_extremes().map(|(lo, hi)| hi / lo),
                seconds: if config.timing { report.wall_time } else { 0.0 },
                converged: report.converged,
            });
        }
    }
    Ok(rows)
}

/// Lanczos estimate of the extreme eigenvalues of `BA` on levels
/// `1..=levels`, one entry per level and preconditioner.
pub fn probe_kappa(config: &ExperimentConfig, steps: usize) -> Result<Vec<(usize, PrecondKind, SpectralEstimate)>> {
    config.validate()?;
    let surface = config.surface.surface();
    let hierarchy = build_hierarchy(surface, config.surface.initial_mesh(), config.levels)?;
    let mut out = Vec::new();
    for &kind in &config.preconditioners {
        for level in 1..=config.levels {
            let h = hierarchy.truncated(level);
            let mesh = h.true_mesh(level);
            let problem = AssembledProblem::with_load_rule(
                mesh,
                config.discretization,
                config.c,
                config.alpha(),
                right_hand_side(config.surface, config.c),
                surface,
                config.data.load_rule(),
            )?;
            let b = build_preconditioner(kind, &h, None, &problem, config.alpha(), config.smoothing_steps)?;
            let est = lanczos_extremes(&problem.matrix, &b, steps, problem.kernel.as_deref())?;
            out.push((mesh.num_cells(), kind, est));
        }
    }
    Ok(out)
}

/// Six significant digits, scientific notation.
pub fn format_sig6(x: f64) -> String {
    format!("{x:.5e}")
}

fn opt(x: Option<f64>) -> String {
    x.map(format_sig6).unwrap_or_default()
}

pub const CSV_HEADER: &str = "N,precond,iters,resid,l2err,eoc,kappa,seconds";

pub fn write_csv<W: Write>(rows: &[ResultRow], mut w: W) -> Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            r.num_cells,
            r.preconditioner,
            r.iterations,
            format_sig6(r.residual),
            opt(r.l2_error),
            opt(r.eoc),
            opt(r.kappa),
            format_sig6(r.seconds)
        )?;
    }
    Ok(())
}

pub fn emit_csv(rows: &[ResultRow], path: &Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    write_csv(rows, &mut w)?;
    w.flush()?;
    Ok(())
}
