//! `polariton`: simulate, sweep, fit and validate heralded polariton transfer.

mod commands;
mod config;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::Config;

/// Exit code for errors of any kind.
const EXIT_ERROR: u8 = 1;

#[derive(Debug)]
pub struct CliError {
    kind: String,
    message: String,
}

impl CliError {
    pub fn new(kind: &str, message: impl Into<String>) -> Self {
        CliError { kind: kind.into(), message: message.into() }
    }

    pub fn config(message: impl Into<String>) -> Self {
        Self::new("config", message)
    }

    pub fn io(message: impl Into<String>) -> Self {
        Self::new("io", message)
    }
}

impl From<polariton_transfer::Error> for CliError {
    fn from(e: polariton_transfer::Error) -> Self {
        CliError::new(e.kind(), e.to_string())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "error[{}]: {}", self.kind, self.message.replace('\n', " "))
    }
}

#[derive(Parser)]
#[command(name = "polariton", version, about = "Heralded dual-rail polariton transfer through coupled-cavity arrays")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the protocol on one graph; writes record.json and rounds.csv.
    Simulate {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Time to fidelity over chain lengths; writes sweep.csv.
    Sweep {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Power-law fit of a sweep; writes fit.json.
    Fit {
        config: Option<PathBuf>,
        /// Fit exact synthetic data instead of running a sweep.
        #[arg(long)]
        synthetic: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exact-model checks; writes validation.json, exit 3 when a check fails.
    Validate {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Greedy measurement times; writes schedule.json and rounds.csv.
    ScheduleOpt {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Long-format (group, x, y) series from a CSV table.
    Plot {
        table: PathBuf,
        #[arg(long)]
        x: String,
        #[arg(long)]
        y: String,
        #[arg(long)]
        group: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<u8, CliError> {
    match cli.command {
        Command::Simulate { config, out } => commands::simulate(&Config::load(&config)?, out),
        Command::Sweep { config, out } => commands::sweep_cmd(&Config::load(&config)?, out),
        Command::Fit { config, synthetic, out } => {
            let config = config.map(|c| Config::load(&c)).transpose()?;
            if config.is_none() && !synthetic {
                return Err(CliError::config("fit needs a config file or --synthetic"));
            }
            commands::fit_cmd(config.as_ref(), synthetic, out)
        }
        Command::Validate { config, out } => commands::validate_cmd(&Config::load(&config)?, out),
        Command::ScheduleOpt { config, out } => commands::schedule_opt(&Config::load(&config)?, out),
        Command::Plot { table, x, y, group, out } => commands::plot(&table, &x, &y, group.as_deref(), out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let first = e.to_string();
            let line = first.lines().next().unwrap_or("invalid arguments").trim_start_matches("error: ");
            eprintln!("{}", CliError::new("usage", line));
            return ExitCode::from(EXIT_ERROR);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}
