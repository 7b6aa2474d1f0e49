use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod analyze;
mod fit;
mod gen;
mod settings;
mod sweep;

use settings::{Overrides, Settings};

/// Identify black-box subsystems from frequency scans and run small-signal
/// modal analysis on the composed system.
#[derive(Debug, Parser)]
#[command(name = "vfmodal", version, about)]
struct Cli {
    #[command(flatten)]
    flags: Overrides,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit every scan entry, reduce, and write the MIMO model
    Fit {
        /// Scan file (.csv or .json)
        scan: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Modes, participation factors and optional pole comparison
    Analyze {
        /// Model JSON or composition plan JSON
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Reference model whose poles the analyzed ones are compared against
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Scale one subsystem's gain over a factor grid and track the modes
    Sweep {
        plan: PathBuf,
        #[arg(long)]
        subsystem: String,
        /// `a,b,c` or `start:step:stop`
        #[arg(long)]
        factors: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Synthetic plants with known poles
    Oracle {
        #[command(subcommand)]
        action: OracleAction,
    },
}

#[derive(Debug, Subcommand)]
enum OracleAction {
    /// Write a plant model and its sampled frequency response
    Gen(gen::GenArgs),
}

/// How a command finished when it did not error out.
pub enum Outcome {
    Clean,
    /// Outputs were written but something needs attention.
    Flagged(String),
}

fn is_input_error(err: &anyhow::Error) -> bool {
    err.chain().any(|cause| {
        if let Some(e) = cause.downcast_ref::<vfmodal::Error>() {
            use vfmodal::Error::*;
            matches!(
                e,
                Parse { .. }
                    | InvalidScan { .. }
                    | InvalidArgument(_)
                    | Io(_)
                    | Json(_)
                    | Csv(_)
                    | UnresolvedPort(_)
                    | Duplicate { .. }
                    | UnknownSubsystem(_)
            )
        } else {
            cause.is::<serde_json::Error>() || cause.is::<std::io::Error>()
        }
    })
}

fn run(cli: Cli) -> anyhow::Result<Outcome> {
    let settings = Settings::resolve(cli.flags)?;
    if let Some(jobs) = settings.jobs {
        rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build_global()?;
    }
    match cli.command {
        Command::Fit { scan, out } => fit::run(&scan, &out, &settings),
        Command::Analyze { input, out, truth } => analyze::run(&input, truth.as_deref(), &out, &settings),
        Command::Sweep {
            plan,
            subsystem,
            factors,
            out,
        } => {
            let factors = sweep::parse_factors(&factors)
                .map_err(|e| vfmodal::Error::InvalidArgument(format!("--factors: {e:#}")))?;
            sweep::run(&plan, &subsystem, &factors, &out, &settings)
        }
        Command::Oracle {
            action: OracleAction::Gen(args),
        } => gen::run(&args, &settings),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(Outcome::Clean) => ExitCode::SUCCESS,
        Ok(Outcome::Flagged(why)) => {
            eprintln!("warning: {why}");
            ExitCode::from(1)
        }
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(if is_input_error(&err) { 2 } else { 1 })
        }
    }
}
