use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use poflab_core::{Method, PofError, SamplingMethod};

mod commands;

#[derive(Parser)]
#[command(name = "poflab", version, about = "Probability-of-failure estimation with locally linear SVM surrogates")]
struct Cli {
    /// Log level when RUST_LOG is unset.
    #[arg(long, global = true, default_value = "warn")]
    log_level: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a uniform or POF-Darts training set and write the sample CSV.
    Sample(SampleArgs),
    /// Train a classifier on a sample CSV and write its JSON model.
    Train(TrainArgs),
    /// Direct or surrogate Monte Carlo estimate of the failure probability.
    Estimate(EstimateArgs),
    /// Accuracy benchmark over methods, training sizes and sampling modes.
    Benchmark(BenchmarkArgs),
    /// Gabriel-pair distance and boundary gap across sample sizes.
    Convergence(ConvergenceArgs),
    /// Lotka-Volterra comparison of PPSVMG against direct Monte Carlo.
    Lotka(LotkaArgs),
    /// Export CSV tables for plotting.
    #[command(subcommand)]
    PlotData(PlotData),
}

#[derive(Args)]
pub struct SampleArgs {
    #[arg(long)]
    pub problem: String,
    #[arg(long, default_value = "pof-darts")]
    pub method: SamplingMethod,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Safety factor on the Lipschitz estimate.
    #[arg(long)]
    pub scale_l: Option<f64>,
    /// Uniform points before darts start.
    #[arg(long)]
    pub init: Option<usize>,
    #[arg(long)]
    pub grad_floor: Option<f64>,
    #[arg(long)]
    pub max_misses: Option<usize>,
    /// Sample CSV path; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write the Gabriel edited set and report M_n.
    #[arg(long)]
    pub ges: Option<PathBuf>,
    /// Edit in coordinates scaled to the unit box.
    #[arg(long, requires = "ges")]
    pub scaled: bool,
}

/// Hyperparameter flags; each one pins its axis of the cross-validation grid.
#[derive(Args)]
pub struct HyperArgs {
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub kappa: Option<f64>,
    /// Nearest CBPs per PPSVMG cluster.
    #[arg(long)]
    pub big_k: Option<usize>,
    /// Merge similarity threshold.
    #[arg(long)]
    pub s: Option<f64>,
    /// Models consulted per prediction.
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub k_clusters: Option<usize>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub knn_k: Option<usize>,
    #[arg(long)]
    pub gamma: Option<f64>,
}

#[derive(Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub samples: PathBuf,
    /// Problem the samples came from, recorded with the training set.
    #[arg(long, default_value = "unknown")]
    pub problem: String,
    #[arg(long, default_value = "ppsvmg")]
    pub method: Method,
    #[command(flatten)]
    pub hyper: HyperArgs,
    /// Cross-validation folds; 0 trains with the given hyperparameters.
    #[arg(long, default_value_t = 0)]
    pub cv: usize,
    /// JSON hyperparameter grid for cross-validation.
    #[arg(long)]
    pub grid: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// JSON training report.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Args)]
pub struct EstimateArgs {
    #[arg(long)]
    pub problem: String,
    /// Surrogate model JSON; direct Monte Carlo when omitted.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Monte Carlo points.
    #[arg(long, default_value_t = 5000)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Test points for a surrogate accuracy column; 0 skips it.
    #[arg(long, default_value_t = 0)]
    pub test_size: usize,
    /// Training size recorded with a surrogate estimate.
    #[arg(long, default_value_t = 0)]
    pub n_train: usize,
    #[arg(long, default_value_t = 0)]
    pub rep: usize,
    /// Results CSV to append to.
    #[arg(long)]
    pub results: Option<PathBuf>,
}

#[derive(Args)]
pub struct BenchmarkArgs {
    /// JSON config; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub problem: Option<String>,
    #[arg(long, value_delimiter = ',')]
    pub methods: Option<Vec<Method>>,
    #[arg(long, value_delimiter = ',')]
    pub sizes: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub samplings: Option<Vec<SamplingMethod>>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub test_size: Option<usize>,
    #[arg(long)]
    pub folds: Option<usize>,
    #[arg(long)]
    pub n_pred: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Record wall-clock time per row.
    #[arg(long)]
    pub timing: bool,
    /// Results CSV, appended to.
    #[arg(long)]
    pub out: PathBuf,
    /// Per-cell mean accuracy and 95% band.
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

#[derive(Args)]
pub struct ConvergenceArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub problem: Option<String>,
    #[arg(long, value_delimiter = ',')]
    pub sizes: Option<Vec<usize>>,
    /// Repetitions per size.
    #[arg(long)]
    pub seeds: Option<usize>,
    #[arg(long)]
    pub probes: Option<usize>,
    #[arg(long)]
    pub sampling: Option<SamplingMethod>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct LotkaArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    pub sizes: Option<Vec<usize>>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub folds: Option<usize>,
    #[arg(long)]
    pub n_pred: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub timing: bool,
    /// Results CSV with both methods, appended to.
    #[arg(long)]
    pub out: PathBuf,
    /// Per-size statistics and test p-values.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Subcommand)]
pub enum PlotData {
    /// Classifier decisions on a regular grid over two axes.
    Grid {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        problem: String,
        /// One-based axis pair.
        #[arg(long, value_delimiter = ',', default_values_t = [1, 2])]
        axes: Vec<usize>,
        #[arg(long, default_value_t = 200)]
        resolution: usize,
        /// Add the true label column.
        #[arg(long)]
        truth: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Gabriel pairs and their centre points for a sample CSV.
    Ges {
        #[arg(long)]
        samples: PathBuf,
        /// Edit in coordinates scaled to this problem's unit box.
        #[arg(long)]
        scaled_by: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Accuracy summary of a results CSV.
    Summary {
        #[arg(long)]
        results: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn exit_code(e: &PofError) -> u8 {
    if e.is_numerical() {
        4
    } else if e.is_data_error() {
        3
    } else {
        2
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(&cli.log_level)).init();
    if let Ok(raw) = std::env::var("POFLAB_THREADS") {
        match raw.parse::<usize>() {
            Ok(n) if n > 0 => {
                if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                    log::warn!("could not size the worker pool: {e}");
                }
            }
            _ => {
                eprintln!("error: POFLAB_THREADS must be a positive integer, got `{raw}`");
                return ExitCode::from(2);
            }
        }
    }
    let result = match cli.command {
        Command::Sample(a) => commands::sample(a),
        Command::Train(a) => commands::train(a),
        Command::Estimate(a) => commands::estimate(a),
        Command::Benchmark(a) => commands::benchmark(a),
        Command::Convergence(a) => commands::convergence(a),
        Command::Lotka(a) => commands::lotka(a),
        Command::PlotData(a) => commands::plot_data(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
