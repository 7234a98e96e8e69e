use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use std::path::PathBuf;

#[derive(Parser, Debug)]
#[command(
    name = "lelong",
    version,
    about = "Generalized Lelong numbers of plurisubharmonic functions"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub io: IoOpts,
}

/// Options that change where and how results are written, never what they are.
#[derive(Args, Debug, Clone)]
pub struct IoOpts {
    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Cache directory; implies --cache. LELONG_CACHE_DIR is used otherwise.
    #[arg(long, global = true)]
    pub cache_dir: Option<PathBuf>,
    /// Look up and store results in the cache.
    #[arg(long, global = true)]
    pub cache: bool,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Closed-form value for a toric expression.
    Exact(ExactArgs),
    /// Monte Carlo integrability threshold.
    Estimate(EstimateArgs),
    /// Exact (and optionally estimated) values over a grid of t.
    ScanT(ScanArgs),
    /// Thresholds on random complex lines through the centre.
    Restrict(RestrictArgs),
    /// Truncated weighted Bergman functions on a grid.
    Bergman(BergmanArgs),
    /// Kiselman's directed Lelong number from shell suprema.
    Kiselman(KiselmanArgs),
    /// Named property suite; exits 3 on any violation.
    Verify(VerifyArgs),
    /// Thresholds over a grid, marking points at or above a level.
    Levelset(LevelsetArgs),
}

#[derive(Args, Debug, Serialize, Clone)]
pub struct ExprArgs {
    /// Expression, e.g. "0.5*log(|z1|^2 + |z2|^2)".
    #[arg(long)]
    pub expr: String,
    /// Ambient dimension (defaults to the expression's arity).
    #[arg(long)]
    pub n: Option<usize>,
}

#[derive(Args, Debug, Serialize, Clone)]
pub struct WeightArgs {
    /// Radial weight t·log|z − a|.
    #[arg(long = "weight-t", alias = "t", conflicts_with = "weight_expr")]
    pub weight_t: Option<f64>,
    /// Weight given as an expression.
    #[arg(long = "weight-expr")]
    pub weight_expr: Option<String>,
    /// Centre a, comma-separated complex coordinates ("0.1,0.2-0.3i").
    #[arg(long)]
    pub center: Option<String>,
}

#[derive(Args, Debug, Serialize, Clone)]
pub struct BudgetArgs {
    /// Bisection tolerance.
    #[arg(long, default_value_t = 0.02)]
    pub tol: f64,
    /// Estimation ball radius.
    #[arg(long, default_value_t = 0.0625)]
    pub radius: f64,
    /// Bisection bracket lo:hi.
    #[arg(long, default_value = "0.05:8")]
    pub bracket: String,
    #[arg(long, default_value_t = 8)]
    pub replicas: usize,
    #[arg(long, default_value_t = 200)]
    pub particles: usize,
    #[arg(long, default_value_t = 240)]
    pub levels: usize,
    /// Annulus profile range kmin:kmax; adds the annulus exponent at s = 1.
    #[arg(long)]
    pub annuli: Option<String>,
    /// Samples per annulus for the profile.
    #[arg(long, default_value_t = 4096)]
    pub samples: usize,
}

#[derive(Args, Debug, Serialize)]
pub struct ExactArgs {
    #[command(flatten)]
    pub expr: ExprArgs,
    #[arg(long = "weight-t", alias = "t", default_value = "0")]
    pub t: String,
}

#[derive(Args, Debug, Serialize)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub expr: ExprArgs,
    #[command(flatten)]
    pub weight: WeightArgs,
    #[command(flatten)]
    pub budget: BudgetArgs,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Debug, Serialize)]
pub struct ScanArgs {
    #[command(flatten)]
    pub expr: ExprArgs,
    /// lo:hi:step, both ends included.
    #[arg(long = "t-grid")]
    pub t_grid: String,
    /// Also run the Monte Carlo estimator at every t.
    #[arg(long)]
    pub estimate: bool,
    #[command(flatten)]
    pub budget: BudgetArgs,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Debug, Serialize)]
pub struct RestrictArgs {
    #[command(flatten)]
    pub expr: ExprArgs,
    #[arg(long)]
    pub center: Option<String>,
    #[arg(long, default_value_t = 9)]
    pub lines: usize,
    #[command(flatten)]
    pub budget: BudgetArgs,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Debug, Serialize)]
pub struct BergmanArgs {
    #[command(flatten)]
    pub expr: ExprArgs,
    /// Radial weight exponent t, centred at each grid point.
    #[arg(long = "weight-t", alias = "t", default_value_t = 0.0)]
    pub t: f64,
    /// Fixed weight centre; by default each grid point is its own centre.
    #[arg(long)]
    pub center: Option<String>,
    #[arg(long, default_value_t = 1)]
    pub m: u32,
    #[arg(long)]
    pub degree: Option<u32>,
    #[arg(long, default_value_t = 0.5)]
    pub radius: f64,
    /// Evaluation points separated by ';', coordinates by ','.
    #[arg(long)]
    pub grid: String,
    #[arg(long, default_value_t = 20000)]
    pub samples: usize,
    /// Write the JSON model dump of the first grid point here.
    #[arg(long)]
    #[serde(skip)]
    pub dump: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Debug, Serialize)]
pub struct KiselmanArgs {
    #[command(flatten)]
    pub expr: ExprArgs,
    /// Directions a1,a2,...; entries may be fractions p/q.
    #[arg(long)]
    pub dirs: String,
    #[arg(long)]
    pub point: Option<String>,
    /// Radii r0:ratio:count.
    #[arg(long, default_value = "0.2:0.5:10")]
    pub radii: String,
    #[arg(long, default_value_t = 4096)]
    pub samples: usize,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Fast,
    Full,
}

#[derive(Args, Debug, Serialize)]
pub struct VerifyArgs {
    #[arg(long, value_enum, default_value = "fast")]
    pub suite: Suite,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Debug, Serialize)]
pub struct LevelsetArgs {
    #[command(flatten)]
    pub expr: ExprArgs,
    #[command(flatten)]
    pub weight: WeightArgs,
    /// Points separated by ';', coordinates by ','.
    #[arg(long)]
    pub grid: String,
    /// Level c.
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
    #[command(flatten)]
    pub budget: BudgetArgs,
    #[arg(long)]
    pub seed: Option<u64>,
}
