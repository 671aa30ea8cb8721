use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use surfasp::assembly::Discretization;
use surfasp::harness::{
    emit_csv, format_sig6, probe_kappa, run_experiment, write_csv, DataConvention, ExperimentConfig, PrecondKind,
    SurfaceKind,
};
use surfasp::mesh::build_hierarchy;

#[derive(Parser)]
#[command(
    name = "surfasp",
    version,
    about = "Surface finite elements with auxiliary-space preconditioners"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve on refinement levels 1..=K and write a CSV table.
    Solve(SolveArgs),
    /// Write the reference and true meshes of levels 0..=K.
    Mesh {
        #[arg(long, value_parser = parse::<SurfaceKind>)]
        surface: SurfaceKind,
        #[arg(long)]
        levels: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Lanczos estimates of the extreme eigenvalues of the preconditioned operator.
    ProbeKappa {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long, default_value_t = 60)]
        steps: usize,
    },
}

#[derive(Args)]
struct ProblemArgs {
    #[arg(long, value_parser = parse::<SurfaceKind>)]
    surface: SurfaceKind,
    #[arg(long, value_parser = parse::<Discretization>, default_value = "p1")]
    disc: Discretization,
    #[arg(long, default_value_t = 1.0)]
    c: f64,
    #[arg(long, default_value_t = 3)]
    levels: usize,
    /// Comma separated: fasp-add, fasp-mul, two-add, two-mul, jacobi.
    #[arg(long, value_parser = parse::<PrecondKind>, value_delimiter = ',')]
    precond: Vec<PrecondKind>,
    /// DG penalty (default 10 on surfaces, 20 on 3-manifolds).
    #[arg(long)]
    alpha: Option<f64>,
    /// Allow levels beyond the default size cap.
    #[arg(long)]
    allow_large: bool,
    /// Data convention: `ambient` (barycenter load, errors against the
    /// ambient extension of u) or `lifted` (quadrature of f∘Φ, errors
    /// against u∘Φ).
    #[arg(long, value_parser = parse_data, default_value = "ambient")]
    data: DataConvention,
    /// Gauss-Seidel sweeps per level in the multilevel V-cycle.
    #[arg(long, default_value_t = 1)]
    smoothing_steps: usize,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long, default_value_t = 2000)]
    maxit: usize,
    /// CSV destination; standard output if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write zero wall times so the output is reproducible byte for byte.
    #[arg(long)]
    no_timing: bool,
}

fn parse<T: std::str::FromStr<Err = surfasp::Error>>(s: &str) -> Result<T, String> {
    s.parse().map_err(|e: surfasp::Error| e.to_string())
}

fn parse_data(s: &str) -> Result<DataConvention, String> {
    match s {
        "ambient" => Ok(DataConvention::Ambient),
        "lifted" => Ok(DataConvention::Lifted),
        _ => Err(format!("unknown data convention '{s}'")),
    }
}

fn config(p: &ProblemArgs) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(p.surface, p.disc, p.c, p.levels);
    if !p.precond.is_empty() {
        cfg.preconditioners = p.precond.clone();
    }
    cfg.alpha = p.alpha;
    cfg.allow_large = p.allow_large;
    cfg.data = p.data;
    cfg.smoothing_steps = p.smoothing_steps;
    cfg
}

fn run(cli: Cli) -> surfasp::Result<bool> {
    match cli.command {
        Command::Solve(args) => {
            let mut cfg = config(&args.problem);
            cfg.tol = args.tol;
            cfg.max_iterations = args.maxit;
            cfg.timing = !args.no_timing;
            let rows = run_experiment(&cfg)?;
            match &args.out {
                Some(path) => emit_csv(&rows, path)?,
                None => write_csv(&rows, io::stdout().lock())?,
            }
            for r in rows.iter().filter(|r| !r.converged) {
                eprintln!(
                    "N={} {}: no convergence after {} iterations",
                    r.num_cells, r.preconditioner, r.iterations
                );
            }
            Ok(rows.iter().all(|r| r.converged))
        }
        Command::Mesh { surface, levels, out } => {
            let h = build_hierarchy(surface.surface(), surface.initial_mesh(), levels)?;
            fs::create_dir_all(&out)?;
            for l in 0..h.num_levels() {
                for (tag, mesh) in [("reference", h.reference(l)), ("true", h.true_mesh(l))] {
                    let file = fs::File::create(out.join(format!("{}_{tag}_{l}.mesh", surface.name())))?;
                    let mut w = BufWriter::new(file);
                    mesh.write_text(&mut w)?;
                    w.flush()?;
                }
            }
            Ok(true)
        }
        Command::ProbeKappa { problem, steps } => {
            let cfg = config(&problem);
            let mut out = io::stdout().lock();
            writeln!(out, "N,precond,lambda_min,lambda_max,kappa")?;
            for (n, kind, est) in probe_kappa(&cfg, steps)? {
                writeln!(
                    out,
                    "{n},{kind},{},{},{}",
                    format_sig6(est.lambda_min),
                    format_sig6(est.lambda_max),
                    format_sig6(est.kappa())
                )?;
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
