use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::data::parse_delimiter;

/// Outlier detection and robust linear regression by penalized weighted
/// least squares.
#[derive(Debug, Parser)]
#[command(name = "pwls", version)]
pub struct Cli {
    /// Cap on worker threads for resampling and benchmark fan-out.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit at one penalty level.
    Fit(FitArgs),
    /// Weights along the penalty path (path.csv).
    Path(PathArgs),
    /// Choose the penalty level by BIC or stability selection.
    Tune(TuneArgs),
    /// Compare the concomitant-scale M-estimator with scaled PWLS.
    CheckTheorem1(CheckArgs),
    /// Run simulation benchmarks described by a TOML file (bench.csv).
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// Delimited text file with a header row.
    #[arg(long)]
    pub input: PathBuf,

    /// Response column.
    #[arg(long)]
    pub response: String,

    /// Comma-separated predictor columns; every other column when omitted.
    #[arg(long, value_delimiter = ',')]
    pub predictors: Option<Vec<String>>,

    /// Do not prepend a column of ones.
    #[arg(long)]
    pub no_intercept: bool,

    /// Field delimiter: one character, or "tab".
    #[arg(long, default_value = ",", value_parser = parse_delimiter)]
    pub delimiter: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    /// Uniform penalty scales.
    Pwls,
    /// Adaptive penalty scales from the robust pilot fit.
    Apwls,
    /// Heteroscedastic three-step fit with adaptive scales.
    Hpwls,
}

impl MethodArg {
    pub fn name(self) -> &'static str {
        match self {
            MethodArg::Pwls => "pwls",
            MethodArg::Apwls => "apwls",
            MethodArg::Hpwls => "hpwls",
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct MethodArgs {
    #[arg(long, value_enum, default_value_t = MethodArg::Apwls)]
    pub method: MethodArg,

    /// Variance function for hpwls: abs, exp-abs, sqrt-abs or identity.
    #[arg(long, default_value = "abs")]
    pub g: String,

    /// Predictor columns entering the variance model beside the intercept;
    /// the last predictor when omitted.
    #[arg(long, value_delimiter = ',')]
    pub z_cols: Option<Vec<String>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Args)]
pub struct OutArgs {
    /// Output directory.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,

    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub method: MethodArgs,
    #[arg(long)]
    pub lambda: f64,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Args)]
pub struct PathArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub method: MethodArgs,
    /// Number of grid points.
    #[arg(long, default_value_t = 100)]
    pub grid_size: usize,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Tuner {
    Bic,
    Stability,
}

#[derive(Debug, Clone, Args)]
pub struct TuneArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub method: MethodArgs,
    #[arg(long, value_enum, default_value_t = Tuner::Bic)]
    pub tuner: Tuner,
    /// Random-weight pairs for stability selection.
    #[arg(long = "B", default_value_t = 50)]
    pub pairs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 100)]
    pub grid_size: usize,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Args)]
pub struct CheckArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub lambda: f64,
    /// Concomitant-scale constant.
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    /// TOML benchmark description.
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the base seed of the config.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}
