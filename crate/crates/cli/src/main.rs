//! `irlsc`: imbalanced-stream experiments, Bayes boundaries, timing and
//! model lifecycle for incremental RLSC.

mod commands;
mod data;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug)]
pub enum CliError {
    /// Bad flags or values, or a missing input file. Exit status 2.
    Usage(String),
    /// Anything that fails after validation. Exit status 1.
    Runtime(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Runtime(m) => f.write_str(m),
        }
    }
}

pub fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

pub fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

#[derive(Debug, Parser)]
#[command(name = "irlsc", version, about = "Incremental RLSC with class extension and recoding")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the imbalanced-stream protocol for the N, RB and RC methods.
    Experiment(ExperimentArgs),
    /// Write standard and rebalanced Bayes labels on a 2-D grid.
    BayesBoundary(BoundaryArgs),
    /// Measure single-update latency against the number of examples seen.
    Timing(TimingArgs),
    /// Train an incremental model on a dataset and save a checkpoint.
    Fit(FitArgs),
    /// Predict with a saved checkpoint.
    Predict(PredictArgs),
    /// Stream a dataset through the online lambda/alpha selector.
    OnlineSelect(SelectArgs),
}

/// Exactly one data source is required.
#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// Built-in task. `fig1`: two 2-D Gaussians, class "1" at (-1,0) with
    /// sigma 1 and class "-1" at (1,0) with sigma 0.3, lifted to 64 random
    /// Fourier features.
    #[arg(long, value_parser = ["fig1"])]
    pub synthetic: Option<String>,
    /// Prior of class "1" when sampling the built-in task.
    #[arg(long, default_value_t = 0.9)]
    pub gamma: f64,
    /// IDX image file (e.g. MNIST train-images-idx3-ubyte).
    #[arg(long)]
    pub idx_images: Option<PathBuf>,
    /// IDX label file matching --idx-images.
    #[arg(long)]
    pub idx_labels: Option<PathBuf>,
    /// CSV with a header row, numeric feature columns and one label column.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Name of the label column in --csv files.
    #[arg(long, default_value = "label")]
    pub label_column: String,
}

#[derive(Debug, Clone, Args)]
pub struct HyperArgs {
    /// Fixed regularization. Default: chosen from 12 log-spaced values in [1e-6, 1e2].
    #[arg(long, conflicts_with = "lambdas")]
    pub lambda: Option<f64>,
    /// Candidate regularization values (comma separated).
    #[arg(long, value_delimiter = ',')]
    pub lambdas: Vec<f64>,
    /// Fixed recoding exponent in [0, 1]. Default: largest-alpha rule over
    /// 0,0.25,0.5,0.6,0.7,0.9,1.
    #[arg(long, conflicts_with = "alphas")]
    pub alpha: Option<f64>,
    /// Candidate recoding exponents (comma separated, must include 0).
    #[arg(long, value_delimiter = ',')]
    pub alphas: Vec<f64>,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Separate IDX test images (e.g. MNIST t10k). Default: test examples come from the training data.
    #[arg(long, requires = "idx_test_labels")]
    pub idx_test_images: Option<PathBuf>,
    #[arg(long, requires = "idx_test_images")]
    pub idx_test_labels: Option<PathBuf>,
    /// Separate CSV test file.
    #[arg(long)]
    pub csv_test: Option<PathBuf>,
    /// Name of the under-represented class, or `rotate` to make every class
    /// under-represented in turn. Default for --synthetic fig1: "-1".
    #[arg(long)]
    pub imbalanced_class: Option<String>,
    /// Balanced training examples per class; n_bal/5 more are used for validation.
    #[arg(long, default_value_t = 1000)]
    pub n_bal: usize,
    /// Numbers of under-represented examples at which to evaluate.
    #[arg(long, value_delimiter = ',', default_value = "1,5,10,50,100,500")]
    pub checkpoints: Vec<usize>,
    /// Test examples per class.
    #[arg(long, default_value_t = 200)]
    pub n_test: usize,
    #[arg(long, default_value_t = 10)]
    pub trials: usize,
    #[command(flatten)]
    pub hyper: HyperArgs,
    /// Methods to run (comma separated).
    #[arg(long, value_delimiter = ',', default_value = "N,RB,RC")]
    pub methods: Vec<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Trials run concurrently.
    #[arg(long, default_value_t = 1)]
    pub parallel_trials: usize,
}

#[derive(Debug, Args)]
pub struct BoundaryArgs {
    /// Prior(s) of class "1", each in (0, 1).
    #[arg(long, value_delimiter = ',', default_value = "0.9")]
    pub gamma: Vec<f64>,
    #[arg(long, default_value_t = -3.0, allow_hyphen_values = true)]
    pub lo: f64,
    #[arg(long, default_value_t = 3.0, allow_hyphen_values = true)]
    pub hi: f64,
    /// Cells per axis.
    #[arg(long, default_value_t = 200)]
    pub resolution: usize,
    /// Output file for a single gamma. Default: standard output.
    #[arg(long, conflicts_with = "out_dir")]
    pub out: Option<PathBuf>,
    /// Directory receiving one `boundary_gamma_<g>.csv` per gamma.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TimingArgs {
    /// Feature dimension(s).
    #[arg(long, value_delimiter = ',', default_value = "100")]
    pub d: Vec<usize>,
    /// Numbers of examples seen before the timed update.
    #[arg(long, value_delimiter = ',', default_value = "0,100,1000,10000")]
    pub k: Vec<usize>,
    /// Timed updates per (d, k).
    #[arg(long, default_value_t = 200)]
    pub repeats: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Optional CSV output (d,k,median_seconds,samples).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Examples drawn for --synthetic.
    #[arg(long, default_value_t = 2000)]
    pub n_synthetic: usize,
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    #[arg(long, default_value_t = 0.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Checkpoint to write; class names go to `<model>.labels.json`.
    #[arg(long)]
    pub model: PathBuf,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value_t = 2000)]
    pub n_synthetic: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Checkpoint written by `fit` or `online-select`.
    #[arg(long)]
    pub model: PathBuf,
    /// Optional CSV output (index,predicted,label).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value_t = 2000)]
    pub n_synthetic: usize,
    #[command(flatten)]
    pub hyper: HyperArgs,
    /// Every i-th arrival is held out for validation.
    #[arg(long, default_value_t = 6)]
    pub holdout_interval: usize,
    /// Training examples a class needs before its held-out examples count.
    #[arg(long, default_value_t = 50)]
    pub threshold: u64,
    /// Seed for the presentation order.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Optional selection trace CSV (iteration,lambda,alpha,accuracy).
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Arrivals between trace snapshots.
    #[arg(long, default_value_t = 100)]
    pub trace_every: u64,
    /// Optional checkpoint of the selected model.
    #[arg(long)]
    pub model: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Experiment(a) => commands::experiment(a),
        Command::BayesBoundary(a) => commands::bayes_boundary(a),
        Command::Timing(a) => commands::timing(a),
        Command::Fit(a) => commands::fit(a),
        Command::Predict(a) => commands::predict(a),
        Command::OnlineSelect(a) => commands::online_select(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
