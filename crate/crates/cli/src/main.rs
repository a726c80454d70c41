use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use softcompose_cli::{run, Command, ExperimentConfig, RunOptions};

#[derive(Debug, Parser)]
#[command(
    name = "softcompose",
    version,
    about = "Compose entropy-regularised value functions on a gridworld"
)]
struct Args {
    #[arg(value_enum)]
    command: Command,
    /// JSON experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output_dir` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides `seed` in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Learn base tasks with soft Q-learning instead of value iteration.
    #[arg(long)]
    learn: bool,
    /// Compare temporal runs against the exact collect-all optimum.
    #[arg(long)]
    baseline: bool,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let result = ExperimentConfig::load(&args.config).and_then(|mut config| {
        if let Some(seed) = args.seed {
            config.seed = seed;
        }
        let out = args
            .out
            .clone()
            .or_else(|| config.output_dir.clone())
            .unwrap_or_else(|| PathBuf::from("out"));
        let opts = RunOptions {
            config,
            out,
            learn: args.learn,
            baseline: args.baseline,
        };
        run(args.command, &opts)
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
