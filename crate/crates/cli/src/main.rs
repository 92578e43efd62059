mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

/// Environment variable overriding the number of worker threads.
pub const WORKERS_ENV: &str = "HOUSING_SD_WORKERS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

/// Low-income rental housing system-dynamics model.
#[derive(Debug, Parser)]
#[command(name = "housing-sd", version)]
pub struct Cli {
    /// Parameter file (TOML). Defaults to the shipped calibration.
    #[arg(long, global = true)]
    pub params: Option<PathBuf>,
    /// Scenario file (TOML). Defaults to the shipped runs.
    #[arg(long, global = true)]
    pub scenarios: Option<PathBuf>,
    /// Euler step in months; must divide the horizon and burn-in.
    #[arg(long, global = true)]
    pub dt: Option<f64>,
    /// Seed for randomised property checks.
    #[arg(long, global = true, default_value_t = 2018)]
    pub seed: u64,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Format for time series and tables.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one scenario and write its trajectory and metrics.
    Simulate {
        #[arg(long)]
        scenario: String,
        /// Comma-separated series to write; all when omitted.
        #[arg(long, value_delimiter = ',')]
        series: Option<Vec<String>>,
    },
    /// Run every scenario, comparisons, sweeps, extreme conditions and
    /// reference validation, and score the acceptance criteria.
    Suite {
        /// Directory of reference-mode CSVs.
        #[arg(long, default_value = "reference")]
        references: PathBuf,
        /// Scenario compared with the reference modes.
        #[arg(long, default_value = "run4")]
        validate_against: String,
    },
    /// Compare two scenarios metric by metric.
    Compare {
        #[arg(long)]
        baseline: String,
        #[arg(long)]
        variant: String,
    },
    /// One-at-a-time sensitivity sweep over every parameter.
    Sweep {
        #[arg(long, default_value = "run2")]
        scenario: String,
        #[arg(long, default_value_t = 0.15)]
        delta: f64,
    },
    /// Theil statistics against reference-mode CSVs.
    Validate {
        #[arg(long, default_value = "reference")]
        references: PathBuf,
        #[arg(long, default_value = "run4")]
        scenario: String,
    },
    /// Fit parameters to a calibration spec.
    Calibrate {
        #[arg(long)]
        spec: PathBuf,
        /// Also write the fitted parameter file here.
        #[arg(long)]
        write_params: Option<PathBuf>,
    },
}

fn configure_workers() -> anyhow::Result<()> {
    if let Ok(value) = std::env::var(WORKERS_ENV) {
        let n: usize = value
            .parse()
            .map_err(|_| anyhow::anyhow!("{WORKERS_ENV} must be a positive integer, got `{value}`"))?;
        anyhow::ensure!(n > 0, "{WORKERS_ENV} must be a positive integer, got `{value}`");
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_workers().and_then(|()| commands::run(cli));
    match result {
        Ok(status) => status,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
