mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::CliError;

/// Batch driver: simulate paths, estimate parameters, evaluate the limit
/// covariances, and run replicated Monte Carlo experiments, all from a JSON
/// configuration file.
#[derive(Parser)]
#[command(name = "heston-clse", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON configuration file.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Output directory (created if missing). Defaults to the current
    /// directory.
    #[arg(long, global = true, value_name = "DIR", default_value = ".")]
    output: PathBuf,

    /// Override the seed from the configuration file.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for the montecarlo command; 0 picks the number of
    /// cores. Falls back to the HESTON_CLSE_THREADS environment variable.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one path and write series.csv plus meta.json.
    Simulate,
    /// Estimate parameters from a series file; writes estimate.json.
    Estimate,
    /// Evaluate the asymptotic covariance matrices; writes asymptotics.json.
    Asymptotics,
    /// Run a replicated experiment; writes report.json and plot-data CSVs.
    Montecarlo,
}

fn thread_count(cli_threads: Option<usize>) -> Result<usize, CliError> {
    match cli_threads {
        Some(k) => Ok(k),
        None => match std::env::var("HESTON_CLSE_THREADS") {
            Ok(s) => s.trim().parse().map_err(|_| {
                CliError::Config(format!("HESTON_CLSE_THREADS must be an integer, got '{s}'"))
            }),
            Err(_) => Ok(0),
        },
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let config_path = cli
        .config
        .as_deref()
        .ok_or_else(|| CliError::Config("--config <PATH> is required".into()))?;
    let config = config::load(config_path)?;

    let threads = thread_count(cli.threads)?;
    if threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::Runtime(format!("failed to build thread pool: {e}")))?;
    }

    std::fs::create_dir_all(&cli.output).map_err(|e| {
        CliError::Runtime(format!(
            "cannot create output directory {}: {e}",
            cli.output.display()
        ))
    })?;

    match cli.command {
        Command::Simulate => commands::simulate(&config, &cli.output, cli.seed),
        Command::Estimate => commands::estimate(&config, &cli.output),
        Command::Asymptotics => commands::asymptotics(&config, &cli.output),
        Command::Montecarlo => commands::montecarlo(&config, &cli.output, cli.seed),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}
