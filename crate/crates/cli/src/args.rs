use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

/// Ternary momentum neuron toolkit: calibrate, convert and simulate CSS-coded
/// spiking networks, and run the validation studies.
///
/// Exit codes: 0 success, 1 validation failure, 2 usage or configuration
/// error, 3 I/O error.
#[derive(Debug, Parser)]
#[command(name = "tmn", version)]
pub struct Cli {
    /// TOML file whose keys override the command line flags.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Per-layer thresholds from ANN activation percentiles.
    Calibrate(CalibrateArgs),
    /// Replace every ReLU by a spiking layer and save the model.
    Convert(ConvertArgs),
    /// Simulate a converted model over a dataset.
    Run(RunArgs),
    /// Check the membrane identity and residual statistics.
    Validate(ValidateArgs),
    /// Produce report tables for plotting.
    Analyze(AnalyzeArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn ext(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Gate {
    PostFilter,
    OnlineLatch,
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CodingArg {
    Css,
    Rate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Which {
    Mse,
    Residual,
    Energy,
    Ablation,
    Roundtrip,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct CalibrateArgs {
    #[arg(long)]
    pub network: Option<PathBuf>,
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long, default_value_t = 99.99)]
    pub percentile: f64,
    /// Use only the first B batches of the dataset.
    #[arg(long)]
    pub batches: Option<usize>,
    /// Recorded in the calibration file; calibration itself is deterministic.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "calibration.json")]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SnnArgs {
    #[arg(long, value_enum, default_value_t = CodingArg::Css)]
    pub coding: CodingArg,
    #[arg(long, default_value_t = 8)]
    pub horizon: usize,
    #[arg(long, default_value_t = 1)]
    pub precharge: usize,
    #[arg(long, default_value_t = 0.5)]
    pub alpha: f64,
    #[arg(long, value_enum, default_value_t = Gate::PostFilter)]
    pub gate: Gate,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ConvertArgs {
    #[arg(long)]
    pub network: Option<PathBuf>,
    #[arg(long)]
    pub calibration: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub snn: SnnArgs,
    #[arg(long, default_value = "model.json")]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct EnergyArgs {
    /// Energy per accumulate, pJ.
    #[arg(long, default_value_t = 0.9)]
    pub e_ac: f64,
    /// Energy per multiply-accumulate, pJ.
    #[arg(long, default_value_t = 4.6)]
    pub e_mac: f64,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct RunArgs {
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long, default_value = "run")]
    pub output_dir: PathBuf,
    /// Sample whose full trace is exported.
    #[arg(long, default_value_t = 0)]
    pub trace_sample: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[command(flatten)]
    #[serde(flatten)]
    pub energy: EnergyArgs,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ResidualArgs {
    #[arg(long, value_delimiter = ',', default_values_t = [0.3, 0.4, 0.5, 0.6, 0.7])]
    pub alphas: Vec<f64>,
    #[arg(long, default_value_t = 100_000)]
    pub trials: usize,
    #[arg(long = "residual-horizon", default_value_t = 8)]
    pub residual_horizon: usize,
    #[arg(long, default_value_t = 1.0)]
    pub v_th: f64,
    /// Lower end of the uniform input range; defaults to 0.
    #[arg(long)]
    pub input_lo: Option<f64>,
    /// Upper end of the uniform input range; defaults to `v_th`.
    #[arg(long)]
    pub input_hi: Option<f64>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ValidateArgs {
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub residual: ResidualArgs,
    #[arg(long, default_value_t = 10_000)]
    pub identity_trials: usize,
    #[arg(long, value_delimiter = ',', default_values_t = [2usize, 4, 8, 16])]
    pub identity_horizons: Vec<usize>,
    /// Report file; nothing is written when absent.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct AnalyzeArgs {
    #[arg(long, value_enum)]
    pub which: Which,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = "reports")]
    pub output_dir: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,

    #[arg(long, default_value_t = 100_000)]
    pub samples: usize,
    #[arg(long, value_delimiter = ',', default_values_t = [2usize, 3, 4, 5, 6])]
    pub css_horizons: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_values_t = [4usize, 8, 16, 32, 64])]
    pub rate_horizons: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_values_t = [0usize, 1])]
    pub precharges: Vec<usize>,
    #[arg(long, default_value_t = 10_000)]
    pub grid_points: usize,

    #[command(flatten)]
    #[serde(flatten)]
    pub residual: ResidualArgs,

    #[arg(long)]
    pub network: Option<PathBuf>,
    #[arg(long)]
    pub calibration: Option<PathBuf>,
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long, default_value_t = 8)]
    pub horizon: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub energy: EnergyArgs,
}
