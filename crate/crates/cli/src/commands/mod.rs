//! The six experiment commands. Each writes its files plus `report.json`
//! into the output directory and returns its results.

mod compose;
mod counterexample;
mod eval;
mod solve;
mod sweep;
mod temporal;

use std::path::PathBuf;

use rand::Rng;
use softcompose::gridworld::{rollout_with_rng, Layout, Trajectory};
use softcompose::rng::episode_rng;
use softcompose::solver::induced_policy;
use softcompose::{QTable, StochasticPolicy, TabularMdp, Temperature};

pub use compose::{compose, ComposeReport};
pub use counterexample::{counterexample, counterexample_row, epsilon_for, CounterexampleReport, CounterexampleRow};
pub use eval::{eval, EvalReport, PolicyReturns};
pub use solve::{solve, task_file_stem, SolveReport, TaskSolve};
pub use sweep::{sweep, weight_grid, SweepPoint, SweepReport};
pub use temporal::{temporal, TemporalReport};

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub config: ExperimentConfig,
    pub out: PathBuf,
    pub learn: bool,
    pub baseline: bool,
}

impl RunOptions {
    pub fn new(config: ExperimentConfig, out: impl Into<PathBuf>) -> Self {
        RunOptions {
            config,
            out: out.into(),
            learn: false,
            baseline: false,
        }
    }
}

/// Greedy policy at `tau = 0`, Boltzmann under a uniform reference otherwise.
pub(crate) fn acting_policy(q: &QTable, tau: Temperature) -> CliResult<StochasticPolicy> {
    let reference = StochasticPolicy::uniform(q.n_states(), q.n_actions());
    Ok(induced_policy(q, &reference, tau)?)
}

/// Episode `index` of a seeded batch: a uniformly drawn start from `starts`,
/// then a rollout on the same stream.
pub(crate) fn seeded_episode(
    mdp: &TabularMdp,
    policy: &StochasticPolicy,
    starts: &[usize],
    max_steps: usize,
    seed: u64,
    index: u64,
) -> CliResult<Trajectory> {
    let mut rng = episode_rng(seed, index);
    let start = starts[rng.gen_range(0..starts.len())];
    Ok(rollout_with_rng(mdp, policy, start, max_steps, &mut rng)?)
}

pub(crate) fn start_states(layout: &Layout) -> CliResult<Vec<usize>> {
    let starts = layout.start_states();
    if starts.is_empty() {
        return Err(CliError::validation("layout has no item-free start cell"));
    }
    Ok(starts)
}

/// Grid coordinates of `state`, for CSV output.
pub(crate) fn coords(layout: &Layout, state: usize) -> (usize, usize) {
    layout
        .grid()
        .cell_of(state)
        .map(|c| (c.x, c.y))
        .expect("start states are cells")
}
