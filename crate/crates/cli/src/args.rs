use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use endogarble::{Execution, Link, NoiseMode};
use endogarble_service::Estimator;

#[derive(Debug, Parser)]
#[command(
    name = "endogarble",
    version,
    about = "Garbled-input defenses for regression prediction services"
)]
pub struct Cli {
    /// Seed for every random stream [default: 42; for `serve`, the
    /// config file's seed].
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Output file; standard output when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Output format for tables and reports.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,

    #[command(subcommand)]
    pub command: Command,
}

impl Cli {
    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(crate::verify::DEFAULT_SEED)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Closed-form estimation and prediction errors over a γ grid.
    Tradeoff(TradeoffArgs),
    /// Run a seeded Monte Carlo experiment.
    Simulate(SimulateArgs),
    /// Start the garbled prediction service from a JSON config file.
    Serve(ServeArgs),
    /// Query a running service, fit a model to its answers and try to
    /// recover the true parameters.
    Steal(StealArgs),
    /// Run every acceptance check and print one PASS/FAIL line per check.
    Verify,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Independent,
    Shared,
}

impl From<ModeArg> for NoiseMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Independent => NoiseMode::IndependentPerRegressor,
            ModeArg::Shared => NoiseMode::SharedAcrossRegressors,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LinkArg {
    Identity,
    Logistic,
}

impl From<LinkArg> for Link {
    fn from(l: LinkArg) -> Self {
        match l {
            LinkArg::Identity => Link::Identity,
            LinkArg::Logistic => Link::Logistic,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ExecutionArg {
    Sequential,
    Parallel,
}

impl From<ExecutionArg> for Execution {
    fn from(e: ExecutionArg) -> Self {
        match e {
            ExecutionArg::Sequential => Execution::Sequential,
            ExecutionArg::Parallel => Execution::Parallel,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EstimatorArg {
    Ols,
    Logit,
}

impl From<EstimatorArg> for Estimator {
    fn from(e: EstimatorArg) -> Self {
        match e {
            EstimatorArg::Ols => Estimator::Ols,
            EstimatorArg::Logit => Estimator::Logit,
        }
    }
}

/// Covariate distribution: zero mean, per-regressor variances and one
/// covariance shared by every pair.
#[derive(Debug, Clone, Args)]
pub struct CovariateArgs {
    /// Variance of each regressor; a single value applies to all of them.
    #[arg(long = "var-x", value_delimiter = ',', default_value = "1")]
    pub var_x: Vec<f64>,

    /// Covariance between every pair of regressors.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub cov: f64,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Slope vector, comma separated.
    #[arg(long, value_delimiter = ',', required = true, allow_negative_numbers = true)]
    pub beta: Vec<f64>,

    /// Intercept.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub alpha: f64,

    #[arg(long, value_enum, default_value_t = LinkArg::Identity)]
    pub link: LinkArg,
}

#[derive(Debug, Args)]
pub struct TradeoffArgs {
    #[command(flatten)]
    pub model: ModelArgs,

    /// γ values to tabulate; each is applied to every regressor.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub gamma: Option<Vec<f64>>,

    /// Noise scale λ.
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,

    #[command(flatten)]
    pub covariates: CovariateArgs,

    #[arg(long = "noise-mode", value_enum, default_value_t = ModeArg::Independent)]
    pub noise_mode: ModeArg,

    /// Pick each γᵢ's sign to minimize the prediction error.
    #[arg(long = "choose-signs")]
    pub choose_signs: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Experiment {
    Convergence,
    Sweep,
    LogisticFigure,
    SmallSample,
    Recovery,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, value_enum)]
    pub experiment: Experiment,

    #[command(flatten)]
    pub model: ModelArgs,

    /// γ for single-point experiments, or the grid for sweeps (defaults
    /// to 0, 0.05, ..., 1).
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub gamma: Option<Vec<f64>>,

    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,

    /// Output noise scale λ₂.
    #[arg(long = "output-lambda", default_value_t = 0.0)]
    pub output_lambda: f64,

    #[command(flatten)]
    pub covariates: CovariateArgs,

    #[arg(long = "noise-mode", value_enum, default_value_t = ModeArg::Independent)]
    pub noise_mode: ModeArg,

    /// Sample size (largest rung of the convergence ladder).
    #[arg(long, default_value_t = 1_000_000)]
    pub n: usize,

    /// Replicates for the small-sample experiment.
    #[arg(long, default_value_t = 20_000)]
    pub replicates: usize,

    /// Extra sample sizes for the small-sample experiment; one report each.
    #[arg(long = "n-ladder", value_delimiter = ',')]
    pub n_ladder: Option<Vec<usize>>,

    /// λ'/λ assumed by the mis-specified attacker in the recovery experiment.
    #[arg(long = "misspecified-factor", default_value_t = 2.0)]
    pub misspecified_factor: f64,

    /// λ₂ of the output-noise defense in the recovery experiment.
    #[arg(long = "recovery-output-lambda", default_value_t = 0.5)]
    pub recovery_output_lambda: f64,

    #[arg(long, value_enum, default_value_t = ExecutionArg::Parallel)]
    pub execution: ExecutionArg,

    /// Write results without comparing them to the closed forms.
    #[arg(long = "no-check")]
    pub no_check: bool,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// JSON service configuration.
    #[arg(long)]
    pub config: PathBuf,

    /// Override the config's bind address.
    #[arg(long)]
    pub bind: Option<String>,
}

#[derive(Debug, Args)]
pub struct StealArgs {
    /// Base URL of the service.
    #[arg(long)]
    pub endpoint: String,

    /// Number of queries.
    #[arg(long, default_value_t = 100_000)]
    pub n: usize,

    #[arg(long, value_enum, default_value_t = EstimatorArg::Ols)]
    pub estimator: EstimatorArg,

    #[arg(long = "known-lambda")]
    pub known_lambda: Option<f64>,

    #[arg(long = "known-output-lambda", requires = "known_lambda")]
    pub known_output_lambda: Option<f64>,

    /// Rows per request; 1 sends one query at a time.
    #[arg(long, default_value_t = 10_000)]
    pub batch: usize,

    /// Covariate variances; the count must match the service's K.
    #[command(flatten)]
    pub covariates: CovariateArgs,
}
