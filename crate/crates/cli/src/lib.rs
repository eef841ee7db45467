//! Command-line pipeline for bipartite record linkage and the clerical
//! review service.

pub mod commands;
pub mod server;

use std::path::PathBuf;

use betalink::estimators::LossConfig;
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "betalink", version, about = "Bipartite record linkage with Fellegi-Sunter and beta record linkage")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic datafile pair with known truth.
    Simulate(SimulateArgs),
    /// Build comparison data for two datafiles.
    Compare(CompareArgs),
    /// Fit the Fellegi-Sunter mixture model by EM.
    Em(EmArgs),
    /// Maximum-likelihood bipartite matching from fitted parameters.
    Mle(ParamsArgs),
    /// Fellegi-Sunter link / review / non-link decisions.
    Fsrule(FsruleArgs),
    /// Run the beta record linkage Gibbs sampler.
    Gibbs(GibbsArgs),
    /// Bayes point estimate from posterior probabilities.
    Estimate(EstimateArgs),
    /// Score an estimate against the true matching.
    Evaluate(EvaluateArgs),
    /// Serve rejected records for clerical review over HTTP.
    Review(ReviewArgs),
    /// Merge a review decision log into an estimate.
    Merge(MergeArgs),
}

impl Command {
    pub fn stage(&self) -> &'static str {
        match self {
            Command::Simulate(_) => "simulate",
            Command::Compare(_) => "compare",
            Command::Em(_) => "em",
            Command::Mle(_) => "mle",
            Command::Fsrule(_) => "fsrule",
            Command::Gibbs(_) => "gibbs",
            Command::Estimate(_) => "estimate",
            Command::Evaluate(_) => "evaluate",
            Command::Review(_) => "review",
            Command::Merge(_) => "merge",
        }
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 500)]
    pub records: usize,
    /// Fraction of file-2 records that also appear in file 1.
    #[arg(long, default_value_t = 0.1)]
    pub overlap: f64,
    /// Erroneous fields per overlapping file-2 record.
    #[arg(long, default_value_t = 3)]
    pub errors: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// The two datafiles.
    #[arg(long, num_args = 2, required = true)]
    pub input: Vec<PathBuf>,
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EmArgs {
    /// Comparison data.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = 1000)]
    pub iterations: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ParamsArgs {
    /// Comparison data.
    #[arg(long)]
    pub input: PathBuf,
    /// Fitted parameters written by `em`.
    #[arg(long)]
    pub params: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FsruleArgs {
    #[command(flatten)]
    pub params: ParamsArgs,
    /// Admissible false-link rate.
    #[arg(long, default_value_t = 0.0025)]
    pub mu: f64,
    /// Admissible false-non-link rate.
    #[arg(long, default_value_t = 0.005)]
    pub lambda: f64,
}

#[derive(Debug, Args)]
pub struct GibbsArgs {
    /// Comparison data.
    #[arg(long)]
    pub input: PathBuf,
    /// Linkage configuration; its `[prior]` section sets `alpha_pi` and `beta_pi`.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    pub iterations: usize,
    #[arg(long, default_value_t = 100)]
    pub burn_in: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Uniform prior over bipartite matchings instead of the beta prior.
    #[arg(long)]
    pub flat_matching_prior: bool,
    #[arg(long)]
    pub random_scan: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EstimatorKind {
    /// Closed form when the losses allow one, assignment otherwise.
    Auto,
    General,
    Full,
    Partial,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// Posterior probabilities written by `gibbs`.
    #[arg(long)]
    pub input: PathBuf,
    /// `lambda_10,lambda_01,lambda_11',lambda_R`; `inf` disables rejection.
    #[arg(long, default_value = "1,1,2,0.1")]
    pub loss: LossConfig,
    #[arg(long, value_enum, default_value_t = EstimatorKind::Auto)]
    pub estimator: EstimatorKind,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Estimate to score.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub truth: PathBuf,
    /// Overlap-size samples written by `gibbs`, for a posterior summary.
    #[arg(long)]
    pub overlap: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReviewArgs {
    /// The two datafiles, in the order given to `compare`.
    #[arg(long, num_args = 2, required = true)]
    pub input: Vec<PathBuf>,
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub estimate: PathBuf,
    #[arg(long)]
    pub posterior: PathBuf,
    /// Comparison data, to show disagreement levels next to candidates.
    #[arg(long)]
    pub comparisons: Option<PathBuf>,
    /// Append-only decision log; replayed on start.
    #[arg(long)]
    pub log: PathBuf,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
}

#[derive(Debug, Args)]
pub struct MergeArgs {
    /// Estimate containing rejections.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub log: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

/// Run a parsed command; errors name the failing stage.
pub fn run(cli: Cli) -> anyhow::Result<()> {
    let stage = cli.command.stage();
    let result = match cli.command {
        Command::Simulate(a) => commands::simulate(&a),
        Command::Compare(a) => commands::compare(&a),
        Command::Em(a) => commands::em(&a),
        Command::Mle(a) => commands::mle(&a),
        Command::Fsrule(a) => commands::fsrule(&a),
        Command::Gibbs(a) => commands::gibbs(&a),
        Command::Estimate(a) => commands::estimate(&a),
        Command::Evaluate(a) => commands::evaluate(&a),
        Command::Review(a) => commands::review(&a),
        Command::Merge(a) => commands::merge(&a),
    };
    result.map_err(|e| e.context(format!("stage `{stage}` failed")))
}
