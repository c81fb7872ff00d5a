//! Batch command-line surface over the finitekey library: key-rate sweeps,
//! detector metrics, decoy bounds, postselection accounting, Monte Carlo
//! rate comparisons, and the authentication simulator.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numeric/domain error.

use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

pub mod commands;
pub mod config;
pub mod output;

use commands::Sweep;
use config::{ConfigError, RunConfig};

/// Config problems exit with 2, numeric/domain problems with 3.
#[derive(Debug)]
pub enum CliError {
    Config(ConfigError),
    Numeric(finitekey::Error),
    Io(std::io::Error),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(e) => write!(f, "{e}"),
            CliError::Numeric(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "io error: {e}"),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e)
    }
}

impl From<finitekey::Error> for CliError {
    fn from(e: finitekey::Error) -> Self {
        CliError::Numeric(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) | CliError::Io(_) => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Parser, Debug)]
#[command(
    name = "finitekey",
    version,
    about = "Finite-size BB84 key-length calculator and protocol simulator"
)]
struct Cli {
    /// Run configuration file (sectioned key=value).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for all randomized subcommands.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output path; stdout when absent. For authsim this receives the
    /// JSONL traces while the summary stays on stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = OutputFormat::Csv)]
    format: OutputFormat,
    /// Sweep axis KEY=START:STOP:STEPS over a dotted config key, e.g.
    /// channel.loss_db=0:40:9.
    #[arg(long, global = true)]
    sweep: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Finite-size key lengths at the expected honest observations.
    Keyrate {
        #[command(subcommand)]
        protocol: KeyrateProtocol,
    },
    /// Basis-efficiency mismatch metrics for both detector setups.
    Delta,
    /// Photon-number bounds from observed or expected decoy counts.
    DecoyBounds,
    /// Postselection dimension accounting and lift penalties.
    Postselect,
    /// Monte Carlo expected key rates, fixed versus variable length.
    Simulate,
    /// Authenticated-channel protocol simulator and invariant counters.
    Authsim,
}

#[derive(Subcommand, Debug)]
enum KeyrateProtocol {
    /// Single-photon qubit BB84.
    Qubit,
    /// Three-intensity decoy-state BB84.
    Decoy,
}

fn load_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let path = cli.config.as_ref().ok_or_else(|| {
        CliError::Config(ConfigError {
            message: "--config PATH is required for this subcommand".to_string(),
        })
    })?;
    Ok(RunConfig::load(path)?)
}

fn write_output(cli: &Cli, text: &str) -> Result<(), CliError> {
    match &cli.out {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn dispatch(cli: &Cli) -> Result<(), CliError> {
    let sweep = match &cli.sweep {
        Some(s) => Some(Sweep::parse(s)?),
        None => None,
    };
    let cfg = load_config(cli)?;
    match &cli.command {
        Command::Keyrate { protocol } => {
            let decoy = matches!(protocol, KeyrateProtocol::Decoy);
            let text = commands::cmd_keyrate(&cfg, decoy, &sweep, cli.format)?;
            write_output(cli, &text)
        }
        Command::Delta => {
            let text = commands::cmd_delta(&cfg, &sweep, cli.format)?;
            write_output(cli, &text)
        }
        Command::DecoyBounds => {
            let text = commands::cmd_decoy_bounds(&cfg, cli.format)?;
            write_output(cli, &text)
        }
        Command::Postselect => {
            let text = commands::cmd_postselect(&cfg, &sweep, cli.format)?;
            write_output(cli, &text)
        }
        Command::Simulate => {
            let text = commands::cmd_simulate(&cfg, cli.seed, cli.format)?;
            write_output(cli, &text)
        }
        Command::Authsim => {
            let out = commands::cmd_authsim(&cfg, cli.seed, cli.out.is_some())?;
            if let (Some(path), Some(traces)) = (&cli.out, &out.traces) {
                std::fs::write(path, traces)?;
            }
            print!("{}", out.summary);
            Ok(())
        }
    }
}

/// Parses arguments and runs; returns the process exit code.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // clap prints help/version on stdout with success itself.
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}

pub fn run() -> i32 {
    run_from(std::env::args_os())
}
