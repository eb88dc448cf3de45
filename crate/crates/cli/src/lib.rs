//! Experiment driver for the `odia` binary: config parsing, subcommand
//! dispatch, CSV output and human-readable summaries.

use std::ffi::OsString;
use std::io::{self, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub mod commands;
pub mod config;
pub mod verify;

pub use config::{Antennas, ConfigArgs, ExperimentConfig, FileConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("{0}")]
    Failed(String),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Infeasible(_) => 3,
            CliError::Failed(_) | CliError::Io(_) | CliError::Csv(_) => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "odia", version, about = "Relay-aided opposite-directional interference alignment experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Required relay size and closed-form DoF
    Feasibility(ConfigArgs),
    /// Solve one channel realization and report residuals and effective ranks
    Solve {
        #[command(flatten)]
        config: ConfigArgs,
        /// Trial index whose channel seed is used
        #[arg(long, default_value_t = 0)]
        trial: usize,
    },
    /// Run the invariant suite on small networks
    Verify(VerifyArgs),
    /// Monte-Carlo sweep written as CSV
    Simulate {
        #[command(flatten)]
        config: ConfigArgs,
        /// CSV destination; stdout when absent
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Monte-Carlo sweep summarized as DoF slopes
    Dof(ConfigArgs),
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Channel realizations per check
    #[arg(long, default_value_t = 20)]
    pub trials: usize,
    #[arg(long)]
    pub rank_rel_tol: Option<f64>,
    #[arg(long, default_value_t = config::DEFAULT_RESIDUAL_TOL)]
    pub residual_tol: f64,
}

/// Runs the CLI on `argv` (program name first) with process streams.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run_with(argv, &mut io::stdout().lock(), &mut io::stderr().lock())
}

pub fn run_with<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let rendered = e.render().to_string();
            let _ = if code == 0 { out.write_all(rendered.as_bytes()) } else { err.write_all(rendered.as_bytes()) };
            return code;
        }
    };
    match commands::dispatch(cli.command, out, err) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}
