use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use softcompose::gridworld::{build_task_library, render_value_heatmap};
use softcompose::solver::{greedy_policy, state_values};
use softcompose::{compose_or, solve, QTable, StochasticPolicy, TabularMdp, WeightVector};

use super::{acting_policy, seeded_episode, start_states, RunOptions};
use crate::error::{CliError, CliResult, Context};
use crate::report::Output;
use crate::stats::spearman;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub weight: f64,
    /// Mean over runs of the fraction of episodes ending on each task's items.
    pub fraction_task1: f64,
    pub fraction_task2: f64,
    pub std_task1: f64,
    pub truncated: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub tasks: [String; 2],
    pub temperature: f64,
    pub runs: usize,
    pub episodes_per_run: usize,
    pub max_steps: usize,
    pub points: Vec<SweepPoint>,
    /// Spearman correlation of weight against `fraction_task1`.
    pub spearman: f64,
    /// Greedy evaluation at weights 0 and 1: `[fraction_task1, fraction_task2]`.
    pub greedy_at_zero: [f64; 2],
    pub greedy_at_one: [f64; 2],
}

/// `0, step, 2 step, ..., 1`; `step` must divide one.
pub fn weight_grid(step: f64) -> CliResult<Vec<f64>> {
    if !(step > 0.0 && step <= 1.0) {
        return Err(CliError::validation(format!("weight_step {step} is not in (0, 1]")));
    }
    let n = (1.0 / step).round();
    if (n * step - 1.0).abs() > 1e-9 {
        return Err(CliError::validation(format!("weight_step {step} does not divide 1")));
    }
    let n = n as usize;
    Ok((0..=n).map(|i| i as f64 / n as f64).collect())
}

/// Weight on the first task against where Boltzmann episodes end.
pub fn sweep(opts: &RunOptions) -> CliResult<SweepReport> {
    let config = &opts.config;
    let tasks = config.parsed_tasks()?;
    if tasks.len() != 2 {
        return Err(CliError::validation(format!(
            "sweep needs exactly two tasks, got {}",
            tasks.len()
        )));
    }
    let tau = config.temperature()?;
    if tau.is_zero() {
        return Err(CliError::validation("sweep needs temperature > 0"));
    }
    if config.runs == 0 {
        return Err(CliError::validation("runs must be at least 1"));
    }
    let weights = weight_grid(config.weight_step)?;
    let layout = config.layout.build()?;
    let library = build_task_library(&layout, &tasks, tau, config.foreign_goal_reward)?;
    let solver_opts = config.solve_options();
    let q_list: Vec<QTable> = (0..2)
        .map(|k| {
            let mdp = library.task_mdp(k)?;
            Ok(solve(&mdp, library.reference(), tau, &solver_opts)
                .context(tasks[k].name())?
                .q)
        })
        .collect::<CliResult<_>>()?;
    let goals: Vec<BTreeSet<usize>> = tasks
        .iter()
        .map(|t| {
            t.goal_cells(&layout)
                .iter()
                .filter_map(|&c| layout.grid().state_of(c))
                .collect()
        })
        .collect();
    let starts = start_states(&layout)?;
    let max_steps = config.max_steps_or(20 * layout.grid().n_cells());
    let mdp = library.base();
    let per_weight = config.runs * config.episodes;

    let mut out = Output::create(&opts.out)?;
    let mut points = Vec::with_capacity(weights.len());
    for (wi, &w) in weights.iter().enumerate() {
        let q = compose_or(&q_list, &WeightVector::pair(w)?, tau)?;
        let policy = acting_policy(&q, tau)?;
        let base = (wi * per_weight) as u64;
        let ends: Vec<Option<usize>> = (0..per_weight as u64)
            .into_par_iter()
            .map(|i| Ok(seeded_episode(mdp, &policy, &starts, max_steps, config.seed, base + i)?.exit_state()))
            .collect::<CliResult<_>>()?;
        let run_fractions: Vec<[f64; 2]> = ends.chunks(config.episodes).map(|run| fractions(run, &goals)).collect();
        let mean = |k: usize| run_fractions.iter().map(|f| f[k]).sum::<f64>() / config.runs as f64;
        let m1 = mean(0);
        let var = run_fractions.iter().map(|f| (f[0] - m1).powi(2)).sum::<f64>() / config.runs as f64;
        points.push(SweepPoint {
            weight: w,
            fraction_task1: m1,
            fraction_task2: mean(1),
            std_task1: var.sqrt(),
            truncated: ends.iter().filter(|e| e.is_none()).count(),
        });
        let v = state_values(&q, library.reference(), tau)?;
        render_value_heatmap(&v, layout.grid(), &out.file(&format!("heatmap_w{wi:03}.pgm")))?;
        out.file(&format!("heatmap_w{wi:03}.csv"));
    }

    let mut writer = csv::Writer::from_path(out.file("sweep.csv"))?;
    writer.write_record(["weight", "fraction_task1", "fraction_task2"])?;
    for p in &points {
        writer.write_record([
            p.weight.to_string(),
            p.fraction_task1.to_string(),
            p.fraction_task2.to_string(),
        ])?;
    }
    writer.flush()?;

    let greedy = |w: f64, offset: u64| -> CliResult<[f64; 2]> {
        let q = compose_or(&q_list, &WeightVector::pair(w)?, tau)?;
        greedy_fractions(mdp, &greedy_policy(&q), &starts, max_steps, config, offset, &goals)
    };
    let offset = (weights.len() * per_weight) as u64;
    let xs: Vec<f64> = points.iter().map(|p| p.weight).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.fraction_task1).collect();
    let report = SweepReport {
        tasks: [config.tasks[0].clone(), config.tasks[1].clone()],
        temperature: tau.value(),
        runs: config.runs,
        episodes_per_run: config.episodes,
        max_steps,
        spearman: spearman(&xs, &ys),
        greedy_at_zero: greedy(0.0, offset)?,
        greedy_at_one: greedy(1.0, offset + config.episodes as u64)?,
        points,
    };
    out.finish("sweep", config, &report)?;
    Ok(report)
}

fn fractions(ends: &[Option<usize>], goals: &[BTreeSet<usize>]) -> [f64; 2] {
    let n = ends.len() as f64;
    let count = |k: usize| ends.iter().filter(|e| e.is_some_and(|s| goals[k].contains(&s))).count() as f64;
    [count(0) / n, count(1) / n]
}

fn greedy_fractions(
    mdp: &TabularMdp,
    policy: &StochasticPolicy,
    starts: &[usize],
    max_steps: usize,
    config: &crate::config::ExperimentConfig,
    offset: u64,
    goals: &[BTreeSet<usize>],
) -> CliResult<[f64; 2]> {
    let ends: Vec<Option<usize>> = (0..config.episodes as u64)
        .into_par_iter()
        .map(|i| Ok(seeded_episode(mdp, policy, starts, max_steps, config.seed, offset + i)?.exit_state()))
        .collect::<CliResult<_>>()?;
    Ok(fractions(&ends, goals))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_covers_both_endpoints() {
        let grid = weight_grid(0.05).unwrap();
        assert_eq!(grid.len(), 21);
        assert_eq!((grid[0], grid[20]), (0.0, 1.0));
        assert!((grid[7] - 0.35).abs() < 1e-15);
        assert!(weight_grid(0.3).is_err());
        assert!(weight_grid(0.0).is_err());
    }

    #[test]
    fn fractions_count_exit_cells() {
        let goals = vec![BTreeSet::from([1]), BTreeSet::from([2])];
        let f = fractions(&[Some(1), Some(1), Some(2), None], &goals);
        assert_eq!(f, [0.5, 0.25]);
    }
}
