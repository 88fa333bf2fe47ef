//! `paleomem`: synthetic data, proxy reduction, spectra, memory tests,
//! reconstruction, validation and TCR from the command line.
//!
//! Exit codes: 0 success, 2 configuration or parameter error, 3 data error,
//! 4 numerical failure.

mod commands;
mod config;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use paleomem::noise::NoiseKind;
use paleomem::sampler::Scenario;
use paleomem::Error;

#[derive(Parser)]
#[command(name = "paleomem", version, about = "Long-memory Bayesian temperature reconstruction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic record with known truth.
    Synth {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Collapse a proxy panel into the reduced proxy.
    Reduce {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Periodogram or multitaper spectrum of one series.
    Spectrum {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        column: Option<String>,
        #[arg(long, default_value = "multitaper", value_parser = ["periodogram", "multitaper"])]
        method: String,
        #[arg(long, default_value_t = paleomem::spectral::DEFAULT_TAPERS)]
        tapers: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Long-memory hypothesis tests on one series.
    Memtest {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        column: Option<String>,
        #[arg(long = "test", default_values = ["robinson", "beran", "davies-harte"],
              value_parser = ["robinson", "beran", "davies-harte"])]
        tests: Vec<String>,
        /// Null families for the goodness-of-fit test.
        #[arg(long = "null", default_values = ["fgn", "ar1", "white"], value_parser = parse_kind)]
        nulls: Vec<NoiseKind>,
        #[arg(long)]
        bandwidth: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sample the posterior of one scenario.
    Reconstruct {
        #[arg(long, value_parser = parse_scenario)]
        scenario: Scenario,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        chains: Option<usize>,
        #[arg(long)]
        iterations: Option<usize>,
        #[arg(long)]
        burn_in: Option<usize>,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Score latent draws against observed temperatures.
    Validate {
        #[arg(long)]
        draws: PathBuf,
        #[arg(long)]
        observed: PathBuf,
        #[arg(long, default_value = "temperature")]
        column: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Transient climate response from beta3 draws.
    Tcr {
        /// `LABEL=params.csv`, repeatable.
        #[arg(long = "params", value_parser = parse_pair::<PathBuf>, required = true)]
        params: Vec<(String, PathBuf)>,
        /// `LABEL=weight`, repeatable; equal weights when omitted.
        #[arg(long = "weight", value_parser = parse_pair::<f64>)]
        weights: Vec<(String, f64)>,
        #[arg(long)]
        forcings: PathBuf,
        /// Years of log CO2 used for its standard deviation.
        #[arg(long)]
        window: Option<String>,
        #[arg(long)]
        size: Option<usize>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

fn parse_scenario(s: &str) -> Result<Scenario, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_kind(s: &str) -> Result<NoiseKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_pair<T: std::str::FromStr>(s: &str) -> Result<(String, T), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected LABEL=VALUE, got `{s}`"))?;
    let v = v.parse::<T>().map_err(|_| format!("bad value in `{s}`"))?;
    Ok((k.to_string(), v))
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::Config(_) | Error::ParameterDomain(_)) => 2,
        Some(
            Error::Data(_)
            | Error::Shape(_)
            | Error::DegenerateInput(_)
            | Error::Collinearity { .. }
            | Error::InsufficientSample(_),
        ) => 3,
        Some(Error::NumericalDegeneracy(_) | Error::Embedding(_) | Error::EstimationFailure(_)) => 4,
        None if err.downcast_ref::<std::io::Error>().is_some() || err.downcast_ref::<csv::Error>().is_some() => 3,
        None => 1,
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Synth { config, seed, out_dir } => commands::synth(commands::SynthArgs { config, seed, out_dir }),
        Command::Reduce { config, out_dir } => commands::reduce(&config, &out_dir),
        Command::Spectrum { input, column, method, tapers, out } => {
            commands::spectrum(&input, column.as_deref(), &method, tapers, out.as_deref())
        }
        Command::Memtest { input, column, tests, nulls, bandwidth, out } => {
            commands::memtest(&input, column.as_deref(), &tests, &nulls, bandwidth, out.as_deref())
        }
        Command::Reconstruct { scenario, config, seed, chains, iterations, burn_in, out_dir } => {
            commands::reconstruct(commands::ReconstructArgs {
                scenario,
                config,
                seed,
                chains,
                iterations,
                burn_in,
                out_dir,
            })
        }
        Command::Validate { draws, observed, column, out } => {
            commands::validate_cmd(&draws, &observed, &column, &out).map(|_| ())
        }
        Command::Tcr { params, weights, forcings, window, size, seed, out_dir } => {
            commands::tcr(commands::TcrArgs { params, weights, forcings, window, size, seed, out_dir })
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let code = exit_code(&err);
            log::error!("{err:#}");
            ExitCode::from(code)
        }
    }
}
