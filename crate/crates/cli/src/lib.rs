//! Command-line surface for the covariance estimation library.
//!
//! Exit codes: 0 success, 2 usage error, 3 data error, 4 numeric failure.
//! Every run writes its resolved configuration (including the seed) to
//! `<output>.config.json` so results can be reproduced exactly.

pub mod commands;
pub mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// A CLI failure with its exit-code class.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Numeric(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) => 3,
            CliError::Numeric(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Numeric(m) => m,
        }
    }
}

impl From<cernn_core::Error> for CliError {
    fn from(err: cernn_core::Error) -> Self {
        use cernn_core::Error as E;
        match err {
            E::InvalidInput(m) | E::Stratification(m) => CliError::Data(m),
            E::Singular(m) | E::Underdetermined(m) | E::Numerical(m) => CliError::Numeric(m),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "cernn",
    version,
    about = "Covariance estimation with nuclear-norm-regularized eigenvalue shrinkage: estimators, cross-validation, simulations, clustering, and classification"
)]
pub struct Cli {
    /// Worker threads for parallel experiments (0 = all cores).
    #[arg(long, global = true, default_value_t = 0, env = "CERNN_THREADS")]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Sample,
    Cernn,
    Linear,
    Lw,
    Cnr,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CenterArg {
    /// Center held-out rows by the training-fold mean.
    Train,
    /// Score raw second moments about the origin.
    Zero,
}

impl CenterArg {
    pub fn mode(self) -> cernn_core::selection::CenterMode {
        match self {
            CenterArg::Train => cernn_core::selection::CenterMode::TrainMean,
            CenterArg::Zero => cernn_core::selection::CenterMode::Zero,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CenterArg::Train => "train",
            CenterArg::Zero => "zero",
        }
    }
}

#[derive(Args)]
pub struct EstimateArgs {
    /// Observations CSV (rows = observations, columns = variables).
    #[arg(long)]
    input: PathBuf,
    /// Output covariance CSV.
    #[arg(long)]
    output: PathBuf,
    #[arg(long, value_enum)]
    method: MethodArg,
    /// Penalty strength for cernn: a number or `auto` (cross-validated).
    #[arg(long)]
    lambda: Option<String>,
    /// Mixture constant for cernn (default: scale-matched alpha-hat).
    #[arg(long)]
    alpha: Option<f64>,
    /// Mixing weight in [0,1] for the linear method.
    #[arg(long)]
    gamma: Option<f64>,
    /// Target scale for the linear method (default: mean sample eigenvalue).
    #[arg(long)]
    rho: Option<f64>,
    /// Condition-number cap for cnr: a number or `auto` (cross-validated).
    #[arg(long)]
    kappa_max: Option<String>,
    /// Cross-validation folds for `auto` selection.
    #[arg(long, default_value_t = 5)]
    folds: usize,
    /// Grid size for `auto` selection.
    #[arg(long, default_value_t = 20)]
    grid_size: usize,
    /// Dynamic-range fraction for the penalty grid upper end.
    #[arg(long, default_value_t = 1e-2)]
    epsilon: f64,
    /// RNG seed (default: drawn from OS entropy and echoed to the sidecar).
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum, default_value_t = CenterArg::Train)]
    center_mode: CenterArg,
}

#[derive(Args)]
pub struct CvArgs {
    #[arg(long)]
    input: PathBuf,
    /// Output CSV of (lambda, mean_score) pairs.
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    #[arg(long, default_value_t = 20)]
    grid_size: usize,
    #[arg(long, default_value_t = 1e-2)]
    epsilon: f64,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum, default_value_t = CenterArg::Train)]
    center_mode: CenterArg,
}

#[derive(Args)]
pub struct DispersionArgs {
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value_t = 10)]
    p: usize,
    /// Comma-separated sample sizes.
    #[arg(long, value_delimiter = ',', default_values_t = vec![5, 10, 20, 50, 100, 500])]
    n_list: Vec<usize>,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
pub struct PathsArgs {
    #[arg(long)]
    output: PathBuf,
    /// Descending sample eigenvalues, comma-separated (alternative: --input).
    #[arg(long, value_delimiter = ',')]
    eigenvalues: Option<Vec<f64>>,
    /// Observations CSV whose sample spectrum seeds the paths.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Target condition numbers, comma-separated.
    #[arg(long, value_delimiter = ',')]
    kappas: Vec<f64>,
}

#[derive(Args)]
pub struct LossArgs {
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value_t = 125)]
    p: usize,
    /// `singleton` or a high-eigenvalue fraction like `0.4`.
    #[arg(long, default_value = "singleton")]
    scenario: String,
    /// Target ratio p/n.
    #[arg(long, default_value_t = 4.0)]
    ratio: f64,
    #[arg(long, default_value_t = 0.1)]
    upsilon: f64,
    #[arg(long, default_value_t = 20)]
    trials: usize,
    /// Run the full-scale study (100 trials).
    #[arg(long, default_value_t = false)]
    full_scale: bool,
    /// Methods to compare against cernn, comma-separated (cernn,cnr,lw).
    #[arg(long, value_delimiter = ',', default_values_t = vec!["cnr".to_string(), "lw".to_string()])]
    methods: Vec<String>,
    #[arg(long, default_value_t = 10)]
    folds: usize,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
pub struct ClusterArgs {
    #[arg(long)]
    input: PathBuf,
    /// Output model JSON.
    #[arg(long)]
    output: PathBuf,
    /// Optional hard-assignment CSV (one cluster id per row).
    #[arg(long)]
    assignments: Option<PathBuf>,
    #[arg(long)]
    clusters: usize,
    #[arg(long)]
    lambda: f64,
    #[arg(long, default_value_t = 50)]
    restarts: usize,
    #[arg(long, default_value_t = 500)]
    max_iter: usize,
    #[arg(long, default_value_t = 1e-7)]
    tol: f64,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ClassifyMethod {
    Cernn,
    Rda,
}

#[derive(Args)]
pub struct ClassifyArgs {
    /// Training observations CSV.
    #[arg(long)]
    train: PathBuf,
    /// Training labels CSV (one class id per row).
    #[arg(long)]
    train_labels: PathBuf,
    /// Test observations CSV.
    #[arg(long)]
    test: PathBuf,
    /// Output predictions CSV (one class id per row).
    #[arg(long)]
    output: PathBuf,
    #[arg(long, value_enum, default_value_t = ClassifyMethod::Cernn)]
    method: ClassifyMethod,
    /// Penalty for cernn: a number (shared by all classes) or `auto`
    /// (per-class via stratified cross-validation).
    #[arg(long, default_value = "auto")]
    lambda: String,
    /// Mixing weight for rda: a number in [0,1] or `auto`.
    #[arg(long, default_value = "auto")]
    gamma: String,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    #[arg(long, default_value_t = 20)]
    grid_size: usize,
    #[arg(long, default_value_t = 1e-2)]
    epsilon: f64,
    #[arg(long)]
    seed: Option<u64>,
    /// Optional fitted-model JSON output.
    #[arg(long)]
    model_out: Option<PathBuf>,
}

#[derive(Subcommand)]
pub enum Command {
    /// Estimate a covariance matrix from observations.
    Estimate(EstimateArgs),
    /// Cross-validate the cernn penalty and report the score curve.
    Cv(CvArgs),
    /// Sample-eigenvalue dispersion study on identity-covariance draws.
    SimulateDispersion(DispersionArgs),
    /// Eigenvalue solution paths matched at target condition numbers.
    SimulatePaths(PathsArgs),
    /// Loss-ratio study on bimodal population spectra.
    SimulateLoss(LossArgs),
    /// Covariance-regularized EM clustering.
    Cluster(ClusterArgs),
    /// Per-class Gaussian classification with shrunken covariances.
    Classify(ClassifyArgs),
}

/// Materializes the seed: explicit flag or OS entropy, always echoed.
pub fn resolve_seed(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(rand::random)
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build_global()
        .ok();
    match cli.command {
        Command::Estimate(args) => commands::estimate::run(args),
        Command::Cv(args) => commands::estimate::run_cv(args),
        Command::SimulateDispersion(args) => commands::simulate::run_dispersion(args),
        Command::SimulatePaths(args) => commands::simulate::run_paths(args),
        Command::SimulateLoss(args) => commands::simulate::run_loss(args),
        Command::Cluster(args) => commands::apps::run_cluster(args),
        Command::Classify(args) => commands::apps::run_classify(args),
    }
}

/// Entry point shared with the `cernn` binary.
pub fn main_impl() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {}", err.message());
            ExitCode::from(err.code())
        }
    }
}
