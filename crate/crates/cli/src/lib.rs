//! Command-line harness around `crffw`: instance generation, single solves with CSV traces,
//! multi-method comparisons and the verification suites.

mod compare;
mod generate;
mod io;
mod solve;
mod verify;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub use compare::{MethodSpec, RunManifest};
pub use io::{load_instance, write_trace_csv, TRACE_HEADER};
pub use verify::{Check, Report, Suite};

/// Exit status for runtime failures, including solver divergence.
pub const EXIT_RUNTIME: u8 = 1;
/// Exit status for invalid invocations.
pub const EXIT_USAGE: u8 = 2;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Usage(_) => ExitCode::from(EXIT_USAGE),
            CliError::Runtime(_) => ExitCode::from(EXIT_RUNTIME),
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "usage error: {msg}"),
            CliError::Runtime(e) => write!(f, "error: {e:#}"),
        }
    }
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Runtime(e)
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub(crate) fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Library errors caused by bad arguments are usage errors; everything else is a runtime failure.
pub(crate) fn classify(e: crffw::Error) -> CliError {
    match e {
        crffw::Error::InvalidArgument(msg) => CliError::Usage(msg),
        other => CliError::Runtime(other.into()),
    }
}

#[derive(Debug, Parser)]
#[command(name = "crffw", version, about = "MAP inference for pairwise CRFs with regularized Frank-Wolfe")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a seeded synthetic instance as JSON.
    Generate(GenerateArgs),
    /// Run one solver and write its per-iteration trace.
    Solve(SolveArgs),
    /// Run several methods on several instances and tabulate mean energies and a lambda sweep.
    Compare(CompareArgs),
    /// Run a verification suite and print a JSON report.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InstanceKind {
    Dense,
    Grid,
    Edges,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, value_enum, default_value = "dense")]
    pub kind: InstanceKind,
    /// Node count (dense and edges); grids take --rows/--cols or a square of this size.
    #[arg(long)]
    pub nodes: Option<usize>,
    #[arg(long)]
    pub rows: Option<usize>,
    #[arg(long)]
    pub cols: Option<usize>,
    #[arg(long)]
    pub labels: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Side of the square holding dense pixel positions [default: sqrt(nodes)].
    #[arg(long)]
    pub image_size: Option<f64>,
    /// Multiplier of the standard-normal unaries [default: 10 for dense, 1 otherwise].
    #[arg(long)]
    pub unary_scale: Option<f64>,
    /// Potts weight for dense compatibilities and grid edges.
    #[arg(long, default_value_t = 1.0)]
    pub potts_w: f64,
    /// Dense compatibility drawn at random instead of Potts.
    #[arg(long)]
    pub random_compatibility: bool,
    /// Edge probability of the Erdos-Renyi graph.
    #[arg(long, default_value_t = 0.1)]
    pub edge_prob: f64,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    /// Instance file (`.json` or `.uai`); without it the default dense instance for --seed is used.
    #[arg(long)]
    pub instance: Option<PathBuf>,
    /// Seed of the default dense instance (500 nodes, 21 labels).
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// One of mf, dmf[:damping], fw, cfw, l2fw, efw, pgd, pgm, emd, admm[:rho].
    #[arg(long)]
    pub method: String,
    /// Regularization weight for l2fw and efw.
    #[arg(long, allow_negative_numbers = true)]
    pub lambda: Option<f64>,
    /// constant:A, length:A, harmonic, diminishing, invsqrt, adaptive[:L:sigma] or linesearch.
    #[arg(long)]
    pub stepsize: Option<String>,
    #[arg(long, default_value_t = 20)]
    pub steps: usize,
    /// Trace CSV destination.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Write zeros in the time_ms column so traces are reproducible byte for byte.
    #[arg(long)]
    pub no_timing: bool,
    /// Evaluate the per-step decrease bounds and record them in the trace.
    #[arg(long)]
    pub bound_check: bool,
    /// Decode the final point with block-coordinate rounding instead of nearest rounding.
    #[arg(long)]
    pub bcd: bool,
    /// Final labeling destination, one label per line.
    #[arg(long)]
    pub labeling: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Instance files; repeat the flag or separate with commas.
    #[arg(long = "instance", value_delimiter = ',')]
    pub instances: Vec<PathBuf>,
    /// Generate this many default dense instances (seeds --seed, --seed+1, ...) instead of reading files.
    #[arg(long)]
    pub generate: Option<usize>,
    #[arg(long, default_value_t = 500)]
    pub nodes: usize,
    #[arg(long, default_value_t = 21)]
    pub labels: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Comma-separated entries `method[@lambda][+stepsize]`.
    #[arg(long, default_value = "fw,l2fw@1,efw@0.25,mf,pgd,pgm,emd,admm")]
    pub methods: String,
    #[arg(long, default_value_t = 20)]
    pub steps: usize,
    #[arg(long)]
    pub out: PathBuf,
    /// Method swept over the lambda grid (l2fw or efw); `none` disables the sweep.
    #[arg(long, default_value = "efw")]
    pub sweep_method: String,
    /// Lambda grid as `start:stop:step`.
    #[arg(long, default_value = "0.1:2.5:0.1")]
    pub lambdas: String,
    /// Iteration whose discrete energy the sweep reports.
    #[arg(long, default_value_t = 5)]
    pub sweep_iter: usize,
    #[arg(long)]
    pub no_timing: bool,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, value_enum)]
    pub suite: Suite,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also write the JSON report here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Caps the global rayon pool at `CRFFW_THREADS` when the variable is set.
pub fn configure_threads() -> CliResult<()> {
    if let Ok(v) = std::env::var("CRFFW_THREADS") {
        let n: usize = v
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| usage(format!("CRFFW_THREADS must be a positive integer, got '{v}'")))?;
        // a second initialization in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

pub fn run(cli: Cli) -> CliResult<()> {
    configure_threads()?;
    match cli.command {
        Command::Generate(args) => generate::run(&args),
        Command::Solve(args) => solve::run(&args),
        Command::Compare(args) => compare::run(&args),
        Command::Verify(args) => verify::run(&args),
    }
}
