use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use softcompose::gridworld::{build_task_library, render_value_heatmap};
use softcompose::io::{write_json, write_policy_csv, write_q_csv, write_v_csv, LibraryDocument, SolveDocument};
use softcompose::solver::{induced_policy, q_from_v, state_values, QLearningConfig};
use softcompose::{soft_q_learning, SolveResult, TaskLibrary};

use super::RunOptions;
use crate::error::{CliResult, Context};
use crate::report::Output;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSolve {
    pub name: String,
    pub method: String,
    pub goal_cells: usize,
    /// Value iterations, or learning episodes.
    pub iterations: usize,
    /// Last update for value iteration; Bellman residual of the table when learned.
    pub residual: f64,
    /// Sup-norm distance of the learned table to the exact solution.
    pub learned_gap: Option<f64>,
    pub min_value: f64,
    pub max_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub temperature: f64,
    pub n_states: usize,
    pub n_actions: usize,
    pub tasks: Vec<TaskSolve>,
}

/// File-name stem for a task's tables.
pub fn task_file_stem(name: &str) -> String {
    name.chars().filter(|c| c.is_ascii_alphanumeric()).collect()
}

/// Solves every configured task on the shared-goal library of the layout.
pub fn solve(opts: &RunOptions) -> CliResult<SolveReport> {
    let config = &opts.config;
    let tau = config.temperature()?;
    let layout = config.layout.build()?;
    let tasks = config.parsed_tasks()?;
    let library = build_task_library(&layout, &tasks, tau, config.foreign_goal_reward)?;
    let solver_opts = config.solve_options();

    let solved: Vec<(SolveResult, TaskSolve)> = (0..library.len())
        .into_par_iter()
        .map(|k| {
            let name = &library.task_names()[k];
            solve_task(&library, k, opts, &solver_opts).context(&format!("task {name}"))
        })
        .collect::<CliResult<_>>()?;

    let mut out = Output::create(&opts.out)?;
    write_json(&out.file("layout.json"), &layout)?;
    write_json(&out.file("library.json"), &LibraryDocument::from(&library))?;
    let grid = layout.grid();
    for (result, summary) in &solved {
        let stem = task_file_stem(&summary.name);
        write_q_csv(&out.file(&format!("q_{stem}.csv")), &result.q)?;
        write_v_csv(&out.file(&format!("v_{stem}.csv")), &result.value)?;
        write_policy_csv(&out.file(&format!("policy_{stem}.csv")), &result.policy)?;
        write_json(&out.file(&format!("solve_{stem}.json")), &SolveDocument::from(result))?;
        render_value_heatmap(&result.value, grid, &out.file(&format!("heatmap_{stem}.pgm")))?;
        out.file(&format!("heatmap_{stem}.csv"));
    }
    let report = SolveReport {
        temperature: tau.value(),
        n_states: library.base().n_states(),
        n_actions: library.base().n_actions(),
        tasks: solved.into_iter().map(|(_, s)| s).collect(),
    };
    out.finish("solve", config, &report)?;
    Ok(report)
}

fn solve_task(
    library: &TaskLibrary,
    k: usize,
    opts: &RunOptions,
    solver_opts: &softcompose::SolveOptions,
) -> CliResult<(SolveResult, TaskSolve)> {
    let config = &opts.config;
    let tau = library.temperature();
    let mdp = library.task_mdp(k)?;
    let reference = library.reference();
    let exact = softcompose::solve(&mdp, reference, tau, solver_opts)?;
    let goal_cells = mdp
        .absorbing_states()
        .iter()
        .filter(|&&s| mdp.rewards().get(s, 0) > 0.0)
        .count();
    let (result, method, learned_gap) = if opts.learn {
        let learning = &config.learning;
        let mut q_config = QLearningConfig::new(tau, learning.episodes, config.seed.wrapping_add(k as u64));
        q_config.rate = learning.rate;
        q_config.max_steps = learning.max_steps;
        q_config.epsilon = learning.epsilon;
        let q = soft_q_learning(&mdp, reference, &q_config)?;
        let value = state_values(&q, reference, tau)?;
        let residual = q_from_v(&mdp, &value)?.sup_norm_diff(&q);
        let policy = induced_policy(&q, reference, tau)?;
        let gap = q.sup_norm_diff(&exact.q);
        let learned = SolveResult {
            value,
            q,
            policy,
            iterations: learning.episodes,
            residual,
        };
        (learned, "soft_q_learning", Some(gap))
    } else if tau.is_zero() {
        (exact, "standard_value_iteration", None)
    } else {
        (exact, "soft_value_iteration", None)
    };
    let cells = &result.value.as_slice()[..mdp.virtual_goal()];
    let summary = TaskSolve {
        name: library.task_names()[k].clone(),
        method: method.to_string(),
        goal_cells,
        iterations: result.iterations,
        residual: result.residual,
        learned_gap,
        min_value: cells.iter().copied().fold(f64::INFINITY, f64::min),
        max_value: cells.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    };
    Ok((result, summary))
}
