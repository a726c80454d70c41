//! Command-line harness: solves task libraries on the gridworld, composes
//! them, and runs the evaluation experiments with machine-readable reports.

pub mod commands;
pub mod config;
pub mod error;
pub mod report;
pub mod stats;

use clap::ValueEnum;

pub use commands::RunOptions;
pub use config::ExperimentConfig;
pub use error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    Solve,
    Compose,
    Eval,
    Sweep,
    Temporal,
    Counterexample,
}

/// Runs `command`, writing into `opts.out`.
pub fn run(command: Command, opts: &RunOptions) -> CliResult<()> {
    match command {
        Command::Solve => commands::solve(opts).map(drop),
        Command::Compose => commands::compose(opts).map(drop),
        Command::Eval => commands::eval(opts).map(drop),
        Command::Sweep => commands::sweep(opts).map(drop),
        Command::Temporal => commands::temporal(opts).map(drop),
        Command::Counterexample => commands::counterexample(opts).map(drop),
    }
}
