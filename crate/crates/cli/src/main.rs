//! `georelay`: solvers and simulators for relay selection under sleep-wake
//! cycling, exposed as CSV-producing subcommands.

mod commands;
mod config;

use clap::{Parser, Subcommand};
use commands::RunArgs;
use georelay::Error;

#[derive(Parser)]
#[command(
    name = "georelay",
    version,
    about = "Relay-selection policies for sleep-wake sensor networks",
    after_help = "Settings come from --config (key=value lines), then trailing \
KEY=VALUE arguments, then dedicated flags. Every output starts with a comment \
block echoing the settings the run used."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the stage-by-stage stopping surfaces and export them as CSV
    SolveBf(RunArgs),
    /// Solve the fixed progress threshold for a multiplier, or calibrate it
    /// to a target mean progress
    SolveAlpha(RunArgs),
    /// Estimate one-hop delay and progress of a policy by simulation
    Onehop(RunArgs),
    /// Simulate packet transfers across a generated network
    E2e(RunArgs),
    /// Closed-form one-hop averages over a threshold grid
    Analytics(RunArgs),
    /// Run a batch of one-hop or end-to-end points into one CSV
    Sweep(RunArgs),
}

fn run(cli: &Cli) -> georelay::Result<()> {
    let args = match &cli.command {
        Command::SolveBf(a)
        | Command::SolveAlpha(a)
        | Command::Onehop(a)
        | Command::E2e(a)
        | Command::Analytics(a)
        | Command::Sweep(a) => a,
    };
    if args.jobs > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(args.jobs)
            .build_global()
            .map_err(|e| Error::Config(format!("cannot size the worker pool: {e}")))?;
    }
    match &cli.command {
        Command::SolveBf(a) => commands::solve_bf(a),
        Command::SolveAlpha(a) => commands::solve_alpha(a),
        Command::Onehop(a) => commands::onehop(a),
        Command::E2e(a) => commands::e2e(a),
        Command::Analytics(a) => commands::analytics(a),
        Command::Sweep(a) => commands::sweep(a),
    }
}

fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Domain(_) | Error::Config(_) => 2,
        Error::Numeric(_) | Error::Convergence(_) => 3,
        Error::Simulation(_) => 4,
    }
}

fn main() {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => {}
        Err(err) => {
            eprintln!("error: {err}");
            std::process::exit(exit_code(&err));
        }
    }
}
