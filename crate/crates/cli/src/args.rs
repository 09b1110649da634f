use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rmf_core::Model;

use crate::output::Format;

#[derive(Parser, Debug)]
#[command(
    name = "rmflab",
    version,
    about = "Simulations and inequality checks for Rademacher and Steinhaus random multiplicative functions"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Global {
    /// rademacher or steinhaus; commands covering both models run both when omitted
    #[arg(long, global = true, value_parser = parse_model)]
    pub model: Option<Model>,
    /// Seed base; trial j uses a seed derived from (seed, j)
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Trials or resamples per case (each command has its own default)
    #[arg(long, global = true)]
    pub trials: Option<u64>,
    /// Worker threads, or "auto"
    #[arg(long, global = true, default_value = "auto", value_parser = parse_threads)]
    pub threads: usize,
    /// Grid exponent: test points are floor(exp(i^epsilon))
    #[arg(long, global = true, default_value_t = 0.1)]
    pub epsilon: f64,
    /// Largest x (simulate 10^4, oracle-check 3000, variance 10^5, submartingale-z 10^4)
    #[arg(long = "x-max", global = true)]
    pub x_max: Option<u64>,
    /// T, the Parseval truncation parameter of the sigma event
    #[arg(long = "t-param", global = true, default_value_t = 10.0)]
    pub t_param: f64,
    /// Truncation of t-integrals (default 50 log x, or 2000 for random Parseval sequences)
    #[arg(long, global = true)]
    pub tcut: Option<f64>,
    /// Relative quadrature tolerance
    #[arg(long = "quad-tol", global = true, default_value_t = 1e-6)]
    pub quad_tol: f64,
    /// Output file (stdout when omitted)
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Smallest-prime-factor table cache file
    #[arg(long = "table-cache", global = true, env = "RMF_TABLE_CACHE")]
    pub table_cache: Option<PathBuf>,
    /// Prime tables are built up to this bound
    #[arg(long = "table-limit", global = true, default_value_t = 10_000_000)]
    pub table_limit: u64,
    /// No progress lines on stderr
    #[arg(long, short, global = true)]
    pub quiet: bool,
}

fn parse_model(s: &str) -> Result<Model, String> {
    s.parse().map_err(|e: rmf_core::Error| e.to_string())
}

/// 0 means rayon's default.
fn parse_threads(s: &str) -> Result<usize, String> {
    if s.eq_ignore_ascii_case("auto") {
        return Ok(0);
    }
    match s.parse::<usize>() {
        Ok(n) if n > 0 => Ok(n),
        _ => Err(format!("expected a positive integer or 'auto', got '{s}'")),
    }
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// M_f(x) and V(x) over the test-point grid, one row per trial and point
    Simulate(SimulateArgs),
    /// Decomposition and scan of M_f(x), V(x) against enumeration for every x <= x-max
    OracleCheck(OracleArgs),
    /// Moment, tail and martingale inequality suites
    Moments(MomentsArgs),
    /// Euler product and Parseval checks
    Euler(EulerArgs),
    /// Distribution of V(x) sqrt(log log x) / x and its exact mean
    Variance(VarianceArgs),
    /// Summarize CSV files written by the other commands
    Report(ReportArgs),
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Only per-trial summaries and the ensemble block
    #[arg(long)]
    pub summary_only: bool,
}

#[derive(Args, Debug)]
pub struct OracleArgs {
    #[arg(long, default_value_t = 20)]
    pub seeds: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Hypercontractive,
    Hoeffding,
    Doob,
    SubmartingaleZ,
    SubmartingaleY,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SequenceKind {
    Z,
    Y,
}

#[derive(Args, Debug)]
pub struct MomentsArgs {
    #[arg(long, value_enum)]
    pub suite: Suite,
    /// Moment order for hypercontractive (1, 2 and 3 when omitted)
    #[arg(long)]
    pub m: Option<u32>,
    /// Support bound N for hypercontractive weights (10, 100 and 1000 when omitted)
    #[arg(long)]
    pub n: Option<u64>,
    /// Points for hoeffding, comma separated
    #[arg(long, value_delimiter = ',', default_values_t = [1000u64, 10_000])]
    pub x: Vec<u64>,
    /// Hoeffding threshold (2 sqrt(x) R(x) when omitted)
    #[arg(long)]
    pub t: Option<f64>,
    /// Conditioning realizations for hoeffding and submartingale-y
    #[arg(long = "cond-seeds", default_value_t = 10)]
    pub cond_seeds: u64,
    /// Sampled steps for submartingale-z
    #[arg(long, default_value_t = 20)]
    pub steps: usize,
    /// Doob sequence (both when omitted)
    #[arg(long, value_enum)]
    pub sequence: Option<SequenceKind>,
    /// Doob thresholds, comma separated (0.5, 1, 2 and 4 times the exact final mean when omitted)
    #[arg(long, value_delimiter = ',')]
    pub lambda: Vec<f64>,
    /// Doob L^p exponent
    #[arg(long, default_value_t = 2.0)]
    pub p: f64,
    /// Base point of the Z sequence for doob
    #[arg(long = "x-base", default_value_t = 1000)]
    pub x_base: u64,
    /// Last point of the Y sequence
    #[arg(long = "y-max", default_value_t = 30)]
    pub y_max: u64,
    /// Report the first run even when it fails
    #[arg(long)]
    pub no_rerun: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EulerCheck {
    Parseval,
    ProductExpectation,
    SigmaEvent,
}

#[derive(Args, Debug)]
pub struct EulerArgs {
    #[arg(long, value_enum)]
    pub check: EulerCheck,
    /// Random sequences for parseval
    #[arg(long, default_value_t = 100)]
    pub sequences: u64,
    /// Product ranges for product-expectation, comma separated
    #[arg(long, value_delimiter = ',', default_values_t = [10u64, 100, 1000])]
    pub x: Vec<u64>,
    /// Heights for product-expectation, comma separated
    #[arg(long, value_delimiter = ',', default_values_t = [0.0f64, 0.5, 2.0])]
    pub t: Vec<f64>,
    /// X_prev for sigma-event
    #[arg(long = "x-prev", default_value_t = 1000)]
    pub x_prev: u64,
    #[arg(long)]
    pub no_rerun: bool,
}

#[derive(Args, Debug)]
pub struct VarianceArgs {
    /// Explicit checkpoints, comma separated (grid points below powers of ten when omitted)
    #[arg(long, value_delimiter = ',')]
    pub at: Vec<u64>,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
}
