mod commands;
mod io;
mod manifest;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

#[derive(Parser, Debug)]
#[command(name = "omap", version, about = "MAP estimation experiments in spectral coefficient space")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Experiment configuration (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Primary output file; the manifest and any side outputs are written next to it.
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the seed in the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the replicate count (sample count for `smallball`).
    #[arg(long)]
    pub replicates: Option<usize>,
    /// Worker threads for Monte Carlo work.
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Closed-form MAP estimate for given or synthesized data.
    Map {
        #[command(flatten)]
        common: Common,
        /// Data file, one coefficient per line.
        #[arg(long, conflicts_with = "synthesize")]
        y: Option<PathBuf>,
        /// Draw data from the configured truth and noise law.
        #[arg(long)]
        synthesize: bool,
        /// Cross-check against numerical minimization.
        #[arg(long)]
        check: bool,
    },
    /// Mean-squared-error sweep over the noise grid.
    Rate {
        #[command(flatten)]
        common: Common,
    },
    /// Posterior small-ball ratios against the Onsager–Machlup prediction.
    Smallball {
        #[command(flatten)]
        common: Common,
    },
    /// Equivalence, Lipschitz and unboundedness diagnostics.
    Diagnose {
        #[command(flatten)]
        common: Common,
    },
}

pub const EXIT_VALIDATION: u8 = 2;
pub const EXIT_CHECK: u8 = 3;
pub const EXIT_DEGENERATE: u8 = 4;

/// Failure report printed to stderr as JSON.
#[derive(Debug, Serialize)]
pub struct CliError {
    #[serde(skip)]
    pub code: u8,
    pub error: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub constraint: Option<String>,
    pub message: String,
}

impl CliError {
    pub fn validation(constraint: &str, message: impl Into<String>) -> Self {
        Self {
            code: EXIT_VALIDATION,
            error: "validation",
            constraint: Some(constraint.to_string()),
            message: message.into(),
        }
    }

    pub fn check(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_CHECK,
            error: "check_failed",
            constraint: None,
            message: message.into(),
        }
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        Self {
            code: 1,
            error: "io",
            constraint: None,
            message: format!("{}: {e}", path.display()),
        }
    }
}

impl From<omap::Error> for CliError {
    fn from(e: omap::Error) -> Self {
        let (code, error) = match e {
            omap::Error::UndefinedRatio { .. } | omap::Error::NoHits { .. } => (EXIT_DEGENERATE, "degenerate"),
            _ => (EXIT_VALIDATION, "validation"),
        };
        Self {
            code,
            error,
            constraint: e.constraint_name().map(str::to_string),
            message: e.to_string(),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Map { common, y, synthesize, check } => commands::map(&common, y.as_deref(), synthesize, check),
        Command::Rate { common } => commands::rate(&common),
        Command::Smallball { common } => commands::smallball(&common),
        Command::Diagnose { common } => commands::diagnose(&common),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", serde_json::to_string(&e).expect("serializable"));
            ExitCode::from(e.code)
        }
    }
}
