use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use youden_napg::simgen::ScenarioId;
use youden_napg::solver::{SolverConfig, Variant};

#[derive(Debug, Parser)]
#[command(name = "youden-napg", version, about = "Sparse biomarker combinations by penalized weighted Youden index")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate scenario data and run a replication study.
    Simulate(SimulateArgs),
    /// Fit a rule on a CSV dataset.
    Fit(FitArgs),
    /// Cross-validate the penalty level only.
    Cv(CvArgs),
    /// Evaluate a saved rule on a CSV dataset.
    Eval(EvalArgs),
    /// Compare the three solvers on one instance.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Scenario {
    S1,
    S2,
    S3,
}

impl From<Scenario> for ScenarioId {
    fn from(s: Scenario) -> Self {
        match s {
            Scenario::S1 => ScenarioId::S1,
            Scenario::S2 => ScenarioId::S2,
            Scenario::S3 => ScenarioId::S3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Ours,
    LassoLogistic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SolverArg {
    NapgPoly,
    NapgBacktracking,
    Papg,
}

impl From<SolverArg> for Variant {
    fn from(s: SolverArg) -> Self {
        match s {
            SolverArg::NapgPoly => Variant::NapgPoly,
            SolverArg::NapgBacktracking => Variant::NapgBacktracking,
            SolverArg::Papg => Variant::Papg,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct SolverOpts {
    #[arg(long, default_value_t = 5000)]
    pub max_iter: usize,
    /// Stationarity residual at which the solver stops.
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[arg(long, default_value_t = 0.8)]
    pub eta: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub delta: f64,
    #[arg(long, default_value_t = 0.1)]
    pub tau1: f64,
    #[arg(long, default_value_t = 0.9)]
    pub tau2: f64,
}

impl SolverOpts {
    pub fn config(&self, variant: Variant) -> SolverConfig {
        SolverConfig {
            variant,
            max_iter: self.max_iter,
            tol_residual: self.tol,
            eta: self.eta,
            delta: self.delta,
            tau1: self.tau1,
            tau2: self.tau2,
            ..SolverConfig::default()
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct ModelOpts {
    /// Weight on sensitivity.
    #[arg(long, default_value_t = 0.5)]
    pub pi: f64,
    /// Fixed penalty level; skips cross-validation.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Comma-separated penalty levels for cross-validation.
    #[arg(long, value_delimiter = ',')]
    pub lambda_grid: Option<Vec<f64>>,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    /// Smoothing bandwidth; defaults to (n₁·n₀)^(−0.1).
    #[arg(long)]
    pub bandwidth: Option<f64>,
    #[arg(long, value_enum, default_value = "ours")]
    pub method: MethodArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "napg-poly")]
    pub solver: SolverArg,
    #[command(flatten)]
    pub solver_opts: SolverOpts,
}

#[derive(Debug, Clone, Args)]
pub struct DataOpts {
    /// CSV file with a header row.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "label")]
    pub label_column: String,
    /// Label value marking diseased rows.
    #[arg(long, default_value = "1")]
    pub positive_label: String,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, value_enum)]
    pub scenario: Scenario,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 1)]
    pub reps: usize,
    /// Number of s3 markers.
    #[arg(long, default_value_t = 500)]
    pub features: usize,
    /// Skip writing the per-replication datasets.
    #[arg(long)]
    pub no_data: bool,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    #[command(flatten)]
    pub model: ModelOpts,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub input: DataOpts,
    /// Held-out CSV evaluated with the fitted rule.
    #[arg(long)]
    pub test: Option<PathBuf>,
    /// Select λ on this CSV instead of by k-fold CV.
    #[arg(long)]
    pub validation: Option<PathBuf>,
    /// Comma-separated true weights, for detection and shrinkage rates.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub truth: Option<Vec<f64>>,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    #[command(flatten)]
    pub model: ModelOpts,
}

#[derive(Debug, Args)]
pub struct CvArgs {
    #[command(flatten)]
    pub input: DataOpts,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    #[command(flatten)]
    pub model: ModelOpts,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Fit result JSON written by `fit`.
    #[arg(long)]
    pub rule: PathBuf,
    #[command(flatten)]
    pub input: DataOpts,
    /// Weight on sensitivity; defaults to the value stored with the rule.
    #[arg(long)]
    pub pi: Option<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub truth: Option<Vec<f64>>,
    /// Also write the metrics to `<out-dir>/eval.json`.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// CSV instance; when absent, one is generated from `--scenario`.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, default_value = "label")]
    pub label_column: String,
    #[arg(long, default_value = "1")]
    pub positive_label: String,
    #[arg(long, value_enum, default_value = "s1")]
    pub scenario: Scenario,
    #[arg(long, default_value_t = 400)]
    pub n: usize,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.5)]
    pub pi: f64,
    #[arg(long, default_value_t = 0.1)]
    pub lambda: f64,
    #[arg(long)]
    pub bandwidth: Option<f64>,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    #[command(flatten)]
    pub solver: SolverOpts,
}
