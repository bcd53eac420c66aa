//! Command-line front end for the friction and wage-setting-power
//! estimators.
//!
//! Four subcommands cover the full workflow: `simulate` writes a synthetic
//! survey bundle with known parameters, `estimate` fits friction parameters
//! to a dataset described by a manifest, `monopsony` runs the per-segment
//! power-index pipeline, and `decompose` regresses a previous run's segment
//! indices on segment characteristics.
//!
//! Every run writes a reproducibility record (input hashes, seed, settings,
//! tool version) into its JSON output, and no output contains a timestamp,
//! so repeating a command with the same inputs and seed reproduces every
//! output file byte for byte.
//!
//! Exit codes: 0 on success, 1 when loading or estimation fails, 2 for
//! usage errors.

use clap::{Args, Parser, Subcommand, ValueEnum};

pub mod commands;
pub mod record;
pub mod tables;

/// Version tag embedded in every JSON output.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Parser)]
#[command(
    name = "frictions",
    version,
    about = "Labour-market friction and wage-setting-power estimation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic survey dataset with known parameters.
    Simulate(SimulateArgs),
    /// Fit friction parameters to a manifest-described dataset.
    Estimate(EstimateArgs),
    /// Estimate the wage-setting power index per segment.
    Monopsony(MonopsonyArgs),
    /// Regress segment power indices on segment characteristics.
    Decompose(DecomposeArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Scenario description (TOML).
    #[arg(long)]
    pub scenario: std::path::PathBuf,
    /// Directory the dataset bundle is written into.
    #[arg(long, required_unless_present = "write_template")]
    pub out: Option<std::path::PathBuf>,
    /// Write a commented starter scenario to --scenario and exit.
    #[arg(long)]
    pub write_template: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum Method {
    Semiparametric,
    SemiparametricRobust,
    Parametric,
    GroupedEstock,
    GroupedInterval,
    UnemploymentMixture,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Semiparametric => "semiparametric",
            Method::SemiparametricRobust => "semiparametric_robust",
            Method::Parametric => "parametric",
            Method::GroupedEstock => "grouped_estock",
            Method::GroupedInterval => "grouped_interval",
            Method::UnemploymentMixture => "unemployment_mixture",
        }
    }
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// Dataset manifest (TOML). Required except for unemployment_mixture.
    #[arg(long)]
    pub manifest: Option<std::path::PathBuf>,
    #[arg(long, value_enum, default_value = "semiparametric")]
    pub method: Method,
    /// Censoring thresholds to sweep (parametric only); one fit per value.
    #[arg(long, value_delimiter = ',')]
    pub censor_level: Vec<f64>,
    /// Duration class lower bounds for the grouped methods.
    #[arg(long, value_delimiter = ',')]
    pub bounds: Vec<f64>,
    /// Grouped unemployment durations (JSON), for unemployment_mixture.
    #[arg(long)]
    pub unemployment: Option<std::path::PathBuf>,
    /// Observed unemployment rate, to report the implied layoff rate.
    #[arg(long)]
    pub unemployment_rate: Option<f64>,
    /// Treat every observation with weight one.
    #[arg(long)]
    pub ignore_weights: bool,
    /// Output JSON path.
    #[arg(long, default_value = "estimates.json")]
    pub out: std::path::PathBuf,
    /// Also export the estimate table as CSV.
    #[arg(long)]
    pub csv: Option<std::path::PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum MuMethod {
    Semiparametric,
    SemiparametricRobust,
    Parametric,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum AggregateMode {
    /// Employment-weighted average of per-segment indices.
    Weighted,
    /// One index estimated on all observations pooled together.
    Pooled,
}

#[derive(Debug, Args)]
pub struct MonopsonyArgs {
    /// Dataset manifest (TOML).
    #[arg(long)]
    pub manifest: std::path::PathBuf,
    #[arg(long, value_enum, default_value = "semiparametric")]
    pub estimator: MuMethod,
    /// Bootstrap replicates per segment (0 disables standard errors).
    #[arg(long, default_value_t = 500)]
    pub bootstrap: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Segments smaller than this are skipped, not estimated.
    #[arg(long, default_value_t = frictions_core::ingest::DEFAULT_MIN_SEGMENT_SIZE)]
    pub min_segment_size: usize,
    #[arg(long, value_enum, default_value = "weighted")]
    pub aggregate: AggregateMode,
    /// Treat every observation with weight one.
    #[arg(long)]
    pub ignore_weights: bool,
    /// Also decompose the segment indices on segment characteristics.
    #[arg(long)]
    pub decompose: bool,
    /// Use a linear year trend instead of per-year shifts (--decompose).
    #[arg(long)]
    pub trend: bool,
    /// Give every segment equal weight in the decomposition (--decompose).
    #[arg(long)]
    pub unweighted: bool,
    /// Directory for results.json / results.csv (and decomposition files).
    #[arg(long, default_value = ".")]
    pub out_dir: std::path::PathBuf,
}

#[derive(Debug, Args)]
pub struct DecomposeArgs {
    /// results.json from a previous monopsony run.
    #[arg(long)]
    pub input: std::path::PathBuf,
    /// Use a linear year trend instead of per-year shifts.
    #[arg(long)]
    pub trend: bool,
    /// Give every segment equal weight.
    #[arg(long)]
    pub unweighted: bool,
    #[arg(long, default_value = "decomposition.json")]
    pub out: std::path::PathBuf,
}

/// Failures after successful argument parsing.
#[derive(Debug)]
pub enum CommandError {
    /// Arguments parsed but are inconsistent (exit 2).
    Usage(String),
    /// Loading, simulation, or estimation failed (exit 1).
    Failed(String),
}

impl std::fmt::Display for CommandError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CommandError::Usage(m) | CommandError::Failed(m) => f.write_str(m),
        }
    }
}

impl CommandError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CommandError::Usage(_) => 2,
            CommandError::Failed(_) => 1,
        }
    }
}

pub fn run(cli: Cli) -> Result<(), CommandError> {
    match cli.command {
        Command::Simulate(args) => commands::simulate(&args),
        Command::Estimate(args) => commands::estimate(&args),
        Command::Monopsony(args) => commands::monopsony(&args),
        Command::Decompose(args) => commands::decompose(&args),
    }
}

/// Parses `argv`, dispatches, and returns the process exit code.
pub fn main_entry() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap uses 0 for --help/--version and 2 for usage errors
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
