//! Command-line front end: sampling, property checks, rendering and statistics.

pub mod artifact;
pub mod check;
pub mod render;
pub mod sample;
pub mod stats;

use std::path::PathBuf;
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use thiserror::Error;

/// Errors mapped to process exit codes.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
    #[error("bad input: {0}")]
    Input(String),
    #[error("time budget exhausted: {0}")]
    Timeout(String),
    #[error(transparent)]
    Core(#[from] baxlab::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Io { .. } | CliError::Input(_) | CliError::Timeout(_) | CliError::Core(_) => 2,
        }
    }

    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        CliError::Io { context: context.into(), source }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Exit code of a run whose property check failed.
pub const EXIT_PROPERTY: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "baxlab", version, about = "Baxter permutations, bipolar orientations and coalescent walks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw a uniform Baxter permutation, tandem walk or bipolar orientation.
    Sample(sample::SampleArgs),
    /// Run a property suite exhaustively on small sizes and on random instances.
    Check(check::CheckArgs),
    /// Render a JSON artifact as SVG.
    Render(render::RenderArgs),
    /// Monte Carlo statistics written as CSV or JSON.
    Stats(stats::StatsArgs),
    /// Simulate the continuum flow driven by correlated Brownian motion.
    Limit(stats::LimitArgs),
}

/// Text produced by a command and whether its property check failed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub text: String,
    pub failed: bool,
}

impl Outcome {
    fn ok(text: String) -> Self {
        Self { text, failed: false }
    }
}

/// Destination shared by the commands.
#[derive(Debug, Clone, Args)]
pub struct OutputArg {
    /// Write to this file instead of standard output.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

/// Output format for tabular results.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum TableFormat {
    Csv,
    Json,
}

/// JSON envelope written by every command.
#[derive(Debug, Serialize)]
pub struct Envelope<'a, C: Serialize, B: Serialize> {
    pub schema: &'a str,
    pub seed: u64,
    pub config: &'a C,
    #[serde(flatten)]
    pub body: B,
}

pub fn to_json<T: Serialize>(value: &T) -> CliResult<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::Input(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub fn deadline(timeout: Option<f64>) -> CliResult<Option<Instant>> {
    match timeout {
        None => Ok(None),
        Some(t) if t.is_finite() && t >= 0.0 => Ok(Some(Instant::now() + Duration::from_secs_f64(t))),
        Some(t) => Err(CliError::Usage(format!("timeout {t} must be a non-negative number of seconds"))),
    }
}

pub fn run(cli: &Cli) -> CliResult<Outcome> {
    match &cli.command {
        Command::Sample(a) => sample::run(a).map(Outcome::ok),
        Command::Check(a) => check::run(a),
        Command::Render(a) => render::run(a).map(Outcome::ok),
        Command::Stats(a) => stats::run_stats(a).map(Outcome::ok),
        Command::Limit(a) => stats::run_limit(a).map(Outcome::ok),
    }
}

/// Output path chosen by the command, if any.
pub fn output_path(cli: &Cli) -> Option<&PathBuf> {
    match &cli.command {
        Command::Sample(a) => a.out.output.as_ref(),
        Command::Check(a) => a.out.output.as_ref(),
        Command::Render(a) => a.out.output.as_ref(),
        Command::Stats(a) => a.out.output.as_ref(),
        Command::Limit(a) => a.out.output.as_ref(),
    }
}

pub fn write_output(path: Option<&PathBuf>, text: &str) -> CliResult<()> {
    use std::io::Write;
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::io(format!("writing {}", p.display()), e)),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| CliError::io("writing standard output", e))
        }
    }
}
