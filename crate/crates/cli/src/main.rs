//! `twisted-hj`: run scenario files through the solvers and write CSV/JSON artifacts.
//!
//! Exit codes: `0` success, `2` invalid input, `3` solver non-convergence,
//! `1` when artifacts cannot be written.

// Negated comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod error;
mod output;
mod scenario;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{Method, ScenarioConfig};
use error::CliError;

#[derive(Parser, Debug)]
#[command(name = "twisted-hj", version, about = "Hamilton-Jacobi equations twisted by a closed one-form on graphs")]
struct Cli {
    /// Output directory; overrides TWISTED_HJ_OUT_DIR and the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Do not echo the JSON summary on stdout.
    #[arg(long, short, global = true)]
    quiet: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Deterministic value function by backward recursion over walks.
    SolveInviscid { config: PathBuf },
    /// Viscous value function.
    SolveViscous {
        config: PathBuf,
        /// Overrides `solver.method`.
        #[arg(long, value_enum)]
        method: Option<Method>,
    },
    /// Density evolution under the optimal drift.
    SolveFp { config: PathBuf },
    /// Value against the stochastic control value of the optimal drift.
    Duality { config: PathBuf },
    /// Mesh or time refinement table.
    Convergence { config: PathBuf },
    /// Closedness, harmonicity and periods of the form.
    CheckForm { config: PathBuf },
    /// Constants controlling the viscous problem.
    CheckHypotheses { config: PathBuf },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::SolveInviscid { .. } => "solve-inviscid",
            Command::SolveViscous { .. } => "solve-viscous",
            Command::SolveFp { .. } => "solve-fp",
            Command::Duality { .. } => "duality",
            Command::Convergence { .. } => "convergence",
            Command::CheckForm { .. } => "check-form",
            Command::CheckHypotheses { .. } => "check-hypotheses",
        }
    }

    fn config(&self) -> &PathBuf {
        match self {
            Command::SolveInviscid { config }
            | Command::SolveViscous { config, .. }
            | Command::SolveFp { config }
            | Command::Duality { config }
            | Command::Convergence { config }
            | Command::CheckForm { config }
            | Command::CheckHypotheses { config } => config,
        }
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let config = ScenarioConfig::load(cli.command.config())?;
    let outcome = match &cli.command {
        Command::SolveInviscid { .. } => commands::solve_inviscid(&config)?,
        Command::SolveViscous { method, .. } => commands::solve_viscous(&config, *method)?,
        Command::SolveFp { .. } => commands::solve_fp(&config)?,
        Command::Duality { .. } => commands::duality(&config)?,
        Command::Convergence { .. } => commands::convergence(&config)?,
        Command::CheckForm { .. } => commands::check_form(&config)?,
        Command::CheckHypotheses { .. } => commands::check_hypotheses_cmd(&config)?,
    };
    let dir = output::resolve_dir(cli.out.as_deref(), config.output.dir.as_deref());
    let text = output::write(&dir, config.name(), cli.command.name(), &outcome, config.output.csv)?;
    if !cli.quiet {
        print!("{text}");
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
