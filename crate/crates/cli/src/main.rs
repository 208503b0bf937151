use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

mod commands;

#[derive(Debug, Parser)]
#[command(name = "lgw", version, about = "Gromov-Wasserstein and linear GW distances between metric-measure spaces")]
struct Cli {
    /// Worker threads for parallel stages (default: all cores).
    #[arg(long, global = true, env = "LGW_JOBS")]
    jobs: Option<usize>,
    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build an mm-space from an image, a mesh or a point list.
    #[command(subcommand)]
    Ingest(IngestCommand),
    /// GW distance between two spaces, or all pairs in a directory.
    Gw(GwArgs),
    /// Linear GW embeddings against a reference and their distances.
    #[command(subcommand)]
    Glgw(GlgwCommand),
    /// Fixed-support GW barycenter of several spaces.
    Barycenter(BarycenterArgs),
    /// Classical multidimensional scaling of a distance matrix.
    Mds(MdsArgs),
    /// Nearest-representative confusion matrix.
    Confusion(ConfusionArgs),
    /// Mean relative error and Pearson correlation of two distance matrices.
    Compare(CompareArgs),
    /// Check the lower and upper gLGW sandwich bounds on one triple.
    Bounds(BoundsArgs),
    /// Validate a space and report diagnostics.
    Check(CheckArgs),
}

#[derive(Debug, Subcommand)]
enum IngestCommand {
    /// Grayscale PGM (P2/P5) image; bright pixels become points.
    Image(IngestImageArgs),
    /// OFF triangle mesh reduced to a geodesic space.
    Mesh(IngestMeshArgs),
    /// CSV point list with `x,y[,z]` rows.
    Points(IngestPointsArgs),
}

#[derive(Debug, Args)]
struct IngestImageArgs {
    input: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
    #[arg(long)]
    points: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    meta: SpaceMeta,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct IngestMeshArgs {
    input: PathBuf,
    #[arg(long, default_value_t = 4000)]
    coarse: usize,
    #[arg(long, default_value_t = 50)]
    points: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    meta: SpaceMeta,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct IngestPointsArgs {
    input: PathBuf,
    /// Subsample to this many points (default: keep all).
    #[arg(long)]
    points: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    meta: SpaceMeta,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SpaceMeta {
    /// Identifier (default: input file stem).
    #[arg(long)]
    id: Option<String>,
    /// Class label stored with the space.
    #[arg(long)]
    label: Option<String>,
}

#[derive(Debug, Clone, Args)]
struct SolverArgs {
    /// Comma-separated starts: product, wasserstein, identity, random[:SEED].
    #[arg(long, value_delimiter = ',', default_value = "product,wasserstein")]
    init: Vec<String>,
    /// Additional seeded random-vertex starts.
    #[arg(long, default_value_t = 5)]
    restarts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Relative objective change at which Frank-Wolfe stops.
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    #[arg(long, default_value_t = 1000)]
    max_iter: usize,
}

#[derive(Debug, Args)]
#[command(args_conflicts_with_subcommands = true, subcommand_negates_reqs = true)]
struct GwArgs {
    #[command(subcommand)]
    pairwise: Option<GwCommand>,
    #[arg(required = true)]
    a: Option<PathBuf>,
    #[arg(required = true)]
    b: Option<PathBuf>,
    /// Also write the optimal plan as `i,j,mass` CSV.
    #[arg(long)]
    plan_out: Option<PathBuf>,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Debug, Subcommand)]
enum GwCommand {
    /// GW distance matrix over every space in a directory.
    Pairwise(GwPairwiseArgs),
}

#[derive(Debug, Args)]
struct GwPairwiseArgs {
    #[arg(long)]
    spaces: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Write the `id,label` sidecar here.
    #[arg(long)]
    labels_out: Option<PathBuf>,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Debug, Subcommand)]
enum GlgwCommand {
    /// Embed every space in a directory against a reference.
    Embed(GlgwEmbedArgs),
    /// Pairwise gLGW matrix over stored embeddings.
    Pairwise(GlgwPairwiseArgs),
}

#[derive(Debug, Args)]
struct GlgwEmbedArgs {
    #[arg(long = "ref")]
    reference: PathBuf,
    #[arg(long)]
    spaces: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Debug, Args)]
struct GlgwPairwiseArgs {
    #[arg(long)]
    embeddings: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    labels_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BarycenterArgs {
    #[arg(long, num_args = 1.., required = true)]
    spaces: Vec<PathBuf>,
    #[arg(long)]
    points: usize,
    #[arg(long, default_value_t = 20)]
    iters: usize,
    /// Input weights (default: uniform).
    #[arg(long, value_delimiter = ',')]
    lambdas: Option<Vec<f64>>,
    #[arg(long, default_value = "barycenter")]
    id: String,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Debug, Args)]
struct MdsArgs {
    matrix: PathBuf,
    #[arg(long, default_value_t = 2)]
    dim: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ConfusionArgs {
    matrix: PathBuf,
    #[arg(long)]
    labels: PathBuf,
    #[arg(long, default_value_t = 10_000)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct CompareArgs {
    /// Reference matrix (denominator of the relative error).
    reference: PathBuf,
    other: PathBuf,
}

#[derive(Debug, Args)]
struct BoundsArgs {
    #[arg(long = "ref")]
    reference: PathBuf,
    #[arg(long)]
    x: PathBuf,
    #[arg(long)]
    y: PathBuf,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Debug, Args)]
struct CheckArgs {
    space: PathBuf,
    /// Report the largest triangle-inequality violation.
    #[arg(long)]
    triangle: bool,
    /// Remove zero-weight points instead of rejecting them.
    #[arg(long)]
    drop_zero: bool,
    /// Write the validated (canonical) space here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct ErrorReport {
    error: &'static str,
    detail: String,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        2 => log::LevelFilter::Debug,
        _ => log::LevelFilter::Trace,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .parse_env("LGW_LOG")
        .format_timestamp(None)
        .init();

    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let report = ErrorReport {
                error: err.kind(),
                detail: err.to_string(),
            };
            eprintln!("{}", serde_json::to_string(&report).expect("error report serializes"));
            ExitCode::FAILURE
        }
    }
}
