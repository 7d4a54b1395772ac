//! `hs-spectral`: command-line front end for the `hs-spectral` library.
//!
//! Every command reads its inputs, runs one module, and writes a single
//! JSON report to stdout (suppressed by `--quiet`) and optionally to
//! `--json-out`. Exit codes: 0 success, 2 parse failure, 3 numerical
//! failure, 4 violated precondition, 5 non-convergence, 1 for I/O errors
//! on output files.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(
    name = "hs-spectral",
    version,
    about = "Spectral subspaces, Brown measures and free perturbations of complex matrices"
)]
pub struct Cli {
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Also write the JSON report to this file.
    #[arg(long, global = true, value_name = "PATH")]
    pub json_out: Option<PathBuf>,
    /// Do not print the report to stdout.
    #[arg(long, global = true)]
    pub quiet: bool,
    /// Worker threads (default: all cores).
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Brown measure (atoms) and, with --reg, the regularized density.
    Brown(BrownArgs),
    /// Spectral subspace K_T(S) for a set descriptor.
    Project(ProjectArgs),
    /// Normalizing flow X' = [[X*, X], X].
    Flow(FlowArgs),
    /// Riesz projection for a disk via node sums.
    Riesz(RieszArgs),
    /// Dyadic integral of a Hoelder path in the p quasi-norm.
    Integrate(IntegrateArgs),
    /// Monte Carlo checks for T + a x y^-1.
    Perturb(PerturbArgs),
    /// Geometric means of the dyadic weighted shift.
    ShiftDemo(ShiftArgs),
}

#[derive(Args, Debug)]
pub struct BrownArgs {
    /// Matrix file (JSON or MatrixMarket).
    pub input: PathBuf,
    /// Regularization a > 0 for the density of T + a z.
    #[arg(long)]
    pub reg: Option<f64>,
    /// Density grid "xmin,xmax,ymin,ymax,h" (default: spectrum + 3a, h = a/4).
    #[arg(long)]
    pub grid: Option<String>,
    /// Write the density grid as CSV (re,im,density).
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Cross-check the density against the Laplacian stencil.
    #[arg(long)]
    pub cross_check: bool,
}

#[derive(Args, Debug)]
#[command(after_help = "Set descriptors:\n  \
    disk:cx,cy,r          closed disk\n  \
    codisk:cx,cy,r        complement of the closed disk\n  \
    closed:[cx,cy,r;...]  complement of a union of open balls\n  \
    pred:halfplane:re<0   half-plane (re|im, < or >, value); the pred: prefix may be omitted\n  \
    all | none")]
pub struct ProjectArgs {
    pub input: PathBuf,
    /// Set descriptor (see below).
    #[arg(long)]
    pub set: String,
    /// Power used for the limit operators.
    #[arg(long, default_value_t = hs_spectral::subspace::DEFAULT_POWER)]
    pub n: usize,
    /// Compare with the generalized-eigenspace oracle.
    #[arg(long)]
    pub oracle: bool,
}

#[derive(Args, Debug)]
pub struct FlowArgs {
    pub input: PathBuf,
    /// Final time (default 200 / |T|_2^2).
    #[arg(long)]
    pub t_end: Option<f64>,
    /// Stop when |[X*, X]|_2 falls below this.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Diagnostic sample every K accepted steps.
    #[arg(long, default_value_t = 10)]
    pub record_every: usize,
    /// Write diagnostics as CSV.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Write the final X as a JSON matrix.
    #[arg(long, value_name = "PATH")]
    pub out_matrix: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct RieszArgs {
    pub input: PathBuf,
    /// Contour center "re,im".
    #[arg(long, default_value = "0,0", allow_hyphen_values = true)]
    pub center: String,
    #[arg(long, default_value_t = 1.0)]
    pub radius: f64,
    /// Initial node count (even, >= 4); doubled until converged.
    #[arg(long, default_value_t = 16)]
    pub nodes: usize,
    /// Target idempotency residual.
    #[arg(long, default_value_t = 1e-12)]
    pub tol: f64,
}

#[derive(Args, Debug)]
pub struct IntegrateArgs {
    /// Path spec "constant|linear|spike:alpha[@a,b]".
    #[arg(long)]
    pub path: String,
    /// Matrix M scaling the path (default: 1x1 identity).
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Quasi-norm exponent in (0, 1).
    #[arg(long, default_value_t = 0.6)]
    pub p: f64,
    #[arg(long, default_value_t = 12)]
    pub levels: u32,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Check {
    Determinant,
    Histogram,
    Weak,
    Resolvent,
    DpRight,
    DpLeft,
    GuNorm,
}

#[derive(Args, Debug)]
pub struct PerturbArgs {
    /// Matrix T (not needed for the d_p checks).
    pub input: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub check: Check,
    /// Regularization a.
    #[arg(long, default_value_t = 1.0)]
    pub a: f64,
    /// Decreasing list of a for the weak-convergence check.
    #[arg(long, value_delimiter = ',', default_value = "0.5,0.2,0.05")]
    pub a_values: Vec<f64>,
    /// Block dimension m.
    #[arg(long, default_value_t = 50)]
    pub m: usize,
    /// Independent trials (default 200 for the two-sample checks, 20 otherwise).
    #[arg(long)]
    pub trials: Option<usize>,
    /// Quasi-norm exponent.
    #[arg(long, default_value_t = 0.5)]
    pub p: f64,
    /// |S - T| for the resolvent check (random direction).
    #[arg(long, default_value_t = 0.01)]
    pub eps: f64,
    /// Histogram bin width (default a).
    #[arg(long)]
    pub bin: Option<f64>,
    /// Histogram CSV (re,im,count).
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ShiftArgs {
    #[arg(long, default_value_t = 20)]
    pub levels: u32,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
