//! Library side of the `covertime` binary: configuration, commands and the
//! lemma suite.

pub mod commands;
pub mod config;
pub mod verify;

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use config::Params;

/// Exit status for configuration and parse errors.
pub const EXIT_USAGE: i32 = 2;
/// Exit status for lemma failures and runtime errors.
pub const EXIT_FAILURE: i32 = 1;

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, config or parameters.
    Usage(anyhow::Error),
    Runtime(anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Runtime(_) => EXIT_FAILURE,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(e) => write!(f, "usage error: {e:#}"),
            CliError::Runtime(e) => write!(f, "error: {e:#}"),
        }
    }
}

impl From<covertime_core::Error> for CliError {
    fn from(e: covertime_core::Error) -> Self {
        use covertime_core::Error::*;
        match e {
            InvalidParameter(_) | Disconnected | Asymmetric(..) | Parse { .. }
            | VertexOutOfRange { .. } | EmptyAnnulus { .. } | BallCoversGraph { .. }
            | MaskCapExceeded { .. } => CliError::Usage(e.into()),
            _ => CliError::Runtime(e.into()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "covertime", version, about = "Random-walk cover-time experiments and lemma checks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Invocation {
    /// Flat JSON config; flags override its values
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub params: Params,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a graph as an edge list
    Gen(Invocation),
    /// Green table a^v_w(r) and the small-radius witness
    Green(Invocation),
    /// Solve the cover-and-exit MDP for one ball
    Mdp(Invocation),
    /// Cover-time tail probability P(cov <= T)
    Tail(Invocation),
    /// Tail decay table across graph sizes (CSV)
    Rate(Invocation),
    /// Run the lemma suite over a corpus
    Verify(Invocation),
    /// Per-center Green and MDP summaries over a graph x radius grid
    Sweep(Invocation),
}

impl Command {
    pub fn parts(&self) -> (&'static str, &Invocation) {
        match self {
            Command::Gen(i) => ("gen", i),
            Command::Green(i) => ("green", i),
            Command::Mdp(i) => ("mdp", i),
            Command::Tail(i) => ("tail", i),
            Command::Rate(i) => ("rate", i),
            Command::Verify(i) => ("verify", i),
            Command::Sweep(i) => ("sweep", i),
        }
    }
}

/// Runs a parsed command and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    match execute(&cli) {
        Ok(failed) => {
            if failed {
                EXIT_FAILURE
            } else {
                0
            }
        }
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}

fn execute(cli: &Cli) -> Result<bool, CliError> {
    let (name, inv) = cli.command.parts();
    let params =
        Params::resolve(inv.params.clone(), inv.config.as_deref()).map_err(CliError::Usage)?;
    let output = commands::dispatch(name, &params)?;
    match commands::body_target(name, &params) {
        Some(path) => commands::write_atomic(&path, &output.body).map_err(CliError::Runtime)?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(output.body.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| CliError::Runtime(e.into()))?;
        }
    }
    for (path, text) in &output.sidecars {
        commands::write_atomic(path, text).map_err(CliError::Runtime)?;
    }
    if let Some(note) = &output.note {
        eprintln!("{note}");
    }
    Ok(output.failed)
}
