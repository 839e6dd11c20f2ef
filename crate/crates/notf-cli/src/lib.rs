//! `notf`: synthetic benchmarks, factorization, scoring, community listing
//! and experiment sweeps over occurrence tensors stored as triple files.
//!
//! Exit codes: 0 success, 1 usage or file-format problems, 2 solver
//! divergence, 3 shape or value-domain violations.

pub mod commands;
pub mod report;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use notf_core::solver::NormVariant;
use notf_core::synth::DEFAULT_SEED;
use notf_core::SolverConfig;

#[derive(Debug, Parser)]
#[command(
    name = "notf",
    version,
    about = "Non-negative occurrence tensor factorization with sparse error splitting"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic benchmark instance (factors, ground truth,
    /// noisy observation)
    Synth(SynthArgs),
    /// Factorize an observation triple file
    Factorize(FactorizeArgs),
    /// Score a reconstruction against reference tensors
    Eval(EvalArgs),
    /// List the communities encoded by a factor file
    Communities(CommunitiesArgs),
    /// Run a grid of synthetic recovery experiments into one CSV
    Sweep(SweepArgs),
}

/// Penalty variant flag; mirrors the solver's variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VariantArg {
    L0,
    L1,
    L2,
}

impl From<VariantArg> for NormVariant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::L0 => NormVariant::L0,
            VariantArg::L1 => NormVariant::L1,
            VariantArg::L2 => NormVariant::L2,
        }
    }
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Tensor shape as n1,n2,n3
    #[arg(long, value_delimiter = ',', default_value = "50,20,10")]
    pub dims: Vec<usize>,
    /// Rank of the planted factors
    #[arg(long = "true-rank", default_value_t = 3)]
    pub true_rank: usize,
    /// Per-mode zero fractions of the planted factors, as s1,s2,s3
    #[arg(long, value_delimiter = ',', default_value = "0.7067,0.55,0.30")]
    pub sparsity: Vec<f64>,
    /// Fraction of occurrence bits to flip
    #[arg(long, default_value_t = 0.1)]
    pub noise: f64,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long = "out-dir")]
    pub out_dir: PathBuf,
}

/// Solver flags shared by `factorize` (scalar) and reused per-run by
/// `sweep`.
#[derive(Debug, Args)]
pub struct SolverFlags {
    #[arg(long, default_value_t = 3)]
    pub rank: usize,
    #[arg(long, default_value_t = 10.0)]
    pub tau: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub eps: f64,
    #[arg(long = "max-outer", default_value_t = 500)]
    pub max_outer: usize,
    #[arg(long = "max-inner", default_value_t = 10)]
    pub max_inner: usize,
    #[arg(long, value_enum, default_value_t = VariantArg::L0)]
    pub variant: VariantArg,
    /// Seed for the factor initialization
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
}

impl SolverFlags {
    pub fn to_config(&self) -> SolverConfig {
        let mut cfg = SolverConfig::new(self.rank, self.variant.into(), self.seed);
        cfg.tau = self.tau;
        cfg.eps = self.eps;
        cfg.max_outer_iters = self.max_outer;
        cfg.max_inner_iters = self.max_inner;
        cfg
    }
}

#[derive(Debug, Args)]
pub struct FactorizeArgs {
    /// Observation tensor (unsigned triple file)
    #[arg(long)]
    pub input: PathBuf,
    #[command(flatten)]
    pub solver: SolverFlags,
    #[arg(long = "out-dir")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Factor file to reconstruct from (use exactly one of --factors /
    /// --recon)
    #[arg(long)]
    pub factors: Option<PathBuf>,
    /// Reconstruction as a triple file
    #[arg(long)]
    pub recon: Option<PathBuf>,
    /// Ground-truth triple file; confusion counts score against this when
    /// given
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Observation triple file
    #[arg(long)]
    pub observation: Option<PathBuf>,
    /// Strict positivity threshold for support comparisons
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
    /// Emit a per-slice error histogram along this mode (1, 2 or 3)
    #[arg(long = "histogram-mode")]
    pub histogram_mode: Option<u8>,
    /// report.json of the factorize run, to echo solver context
    #[arg(long = "run-report")]
    pub run_report: Option<PathBuf>,
    /// manifest.json of the synth run, to echo the noise ratio
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long = "out-dir")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct CommunitiesArgs {
    #[arg(long)]
    pub factors: PathBuf,
    /// Triple file whose header labels name the mode indices
    #[arg(long = "labels-from")]
    pub labels_from: Option<PathBuf>,
    /// Membership threshold on factor weights
    #[arg(long, default_value_t = notf_core::eval::MEMBERSHIP_THRESHOLD)]
    pub threshold: f64,
    #[arg(long = "out-dir")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Noise ratios to sweep
    #[arg(long, value_delimiter = ',', default_value = "0.02,0.05,0.1")]
    pub noise: Vec<f64>,
    /// Ranks to sweep
    #[arg(long, value_delimiter = ',', default_value = "3")]
    pub rank: Vec<usize>,
    /// Variants to sweep
    #[arg(long, value_enum, value_delimiter = ',', default_value = "l0,l1,l2")]
    pub variant: Vec<VariantArg>,
    /// Seeds to sweep; each seeds both the instance and the solver init
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5")]
    pub seed: Vec<u64>,
    #[arg(long, default_value_t = 10.0)]
    pub tau: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub eps: f64,
    #[arg(long = "max-outer", default_value_t = 500)]
    pub max_outer: usize,
    #[arg(long = "max-inner", default_value_t = 10)]
    pub max_inner: usize,
    /// Support threshold for the confusion columns; the default is the
    /// membership epsilon, which reads any genuine weight as an occurrence
    #[arg(long, default_value_t = notf_core::eval::MEMBERSHIP_THRESHOLD)]
    pub threshold: f64,
    /// Worker threads
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[arg(long = "out-dir")]
    pub out_dir: PathBuf,
}

/// Command-line misuse caught past clap (wrong arity, missing operand
/// combinations). Maps to exit code 1 like clap's own errors.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Synth(args) => commands::cmd_synth(&args),
        Command::Factorize(args) => commands::cmd_factorize(&args),
        Command::Eval(args) => commands::cmd_eval(&args),
        Command::Communities(args) => commands::cmd_communities(&args),
        Command::Sweep(args) => commands::cmd_sweep(&args),
    }
}

/// Process exit code for a failed run; see the crate doc for the mapping.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    if err.downcast_ref::<UsageError>().is_some() {
        return 1;
    }
    match err.downcast_ref::<notf_core::Error>() {
        Some(notf_core::Error::Divergence { .. }) => 2,
        Some(notf_core::Error::Shape(_)) | Some(notf_core::Error::Domain(_)) => 3,
        Some(notf_core::Error::Parse(_)) | Some(notf_core::Error::Io(_)) => 1,
        None => 1,
    }
}
