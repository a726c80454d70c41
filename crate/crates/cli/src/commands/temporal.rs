use serde::{Deserialize, Serialize};
use softcompose::gridworld::{collect_all_values, render_trajectory, TemporalAgent};
use softcompose::rng::episode_rng;

use rand::Rng;

use super::{coords, start_states, RunOptions};
use crate::error::{CliResult, Context};
use crate::report::Output;
use crate::stats::Summary;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineComparison {
    /// Completed episodes whose return beat the collect-all optimum of their start.
    pub violations: usize,
    pub compared: usize,
    /// Largest `return - optimum` over completed episodes.
    pub max_excess: f64,
    pub optimal_start_values: Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemporalReport {
    pub n_items: usize,
    pub temperature: f64,
    pub episodes: usize,
    pub max_steps: usize,
    pub completed: usize,
    pub completion_rate: f64,
    pub longest_episode: usize,
    pub returns: Summary,
    pub baseline: Option<BaselineComparison>,
}

/// Continual collection of every item by recomposing the remaining items' tasks.
pub fn temporal(opts: &RunOptions) -> CliResult<TemporalReport> {
    let config = &opts.config;
    let tau = config.temperature()?;
    let layout = config.layout.build()?;
    let grid = layout.grid();
    let n_items = layout.items().len();
    let starts = start_states(&layout)?;
    let max_steps = config.max_steps_or(grid.width() * grid.height() * 6);
    let mut agent = TemporalAgent::new(layout.clone(), tau, config.solve_options())?;

    let mut out = Output::create(&opts.out)?;
    let mut writer = csv::Writer::from_path(out.file("returns.csv"))?;
    writer.write_record([
        "episode",
        "start_x",
        "start_y",
        "return",
        "steps",
        "collected",
        "completed",
    ])?;
    let mut runs = Vec::with_capacity(config.episodes);
    for i in 0..config.episodes {
        let mut rng = episode_rng(config.seed, i as u64);
        let start = starts[rng.gen_range(0..starts.len())];
        let run = agent
            .rollout_with_rng(start, max_steps, &mut rng)
            .context(&format!("episode {i}"))?;
        let (x, y) = coords(&layout, start);
        writer.write_record([
            i.to_string(),
            x.to_string(),
            y.to_string(),
            run.trajectory.total_return.to_string(),
            run.trajectory.len().to_string(),
            run.collected.len().to_string(),
            run.collected_all(n_items).to_string(),
        ])?;
        if i < config.trajectories {
            render_trajectory(
                &run.trajectory.states(),
                &layout,
                &out.file(&format!("trajectory_{i:03}.ppm")),
            )?;
        }
        runs.push((start, run));
    }
    writer.flush()?;

    let baseline = if opts.baseline {
        let optimum = collect_all_values(&layout, &config.solve_options()).context("collect-all baseline")?;
        let mut writer = csv::Writer::from_path(out.file("baseline.csv"))?;
        writer.write_record([
            "start_x",
            "start_y",
            "optimal_return",
            "mean_temporal_return",
            "completed_episodes",
        ])?;
        for &s in &starts {
            let done: Vec<f64> = runs
                .iter()
                .filter(|(start, run)| *start == s && run.collected_all(n_items))
                .map(|(_, run)| run.trajectory.total_return)
                .collect();
            let mean = if done.is_empty() {
                f64::NAN
            } else {
                done.iter().sum::<f64>() / done.len() as f64
            };
            let (x, y) = coords(&layout, s);
            writer.write_record([
                x.to_string(),
                y.to_string(),
                optimum[s].to_string(),
                mean.to_string(),
                done.len().to_string(),
            ])?;
        }
        writer.flush()?;
        let excess: Vec<f64> = runs
            .iter()
            .filter(|(_, run)| run.collected_all(n_items))
            .map(|(s, run)| run.trajectory.total_return - optimum[*s])
            .collect();
        let optimal_start: Vec<f64> = starts.iter().map(|&s| optimum[s]).collect();
        Some(BaselineComparison {
            violations: excess.iter().filter(|&&e| e > 1e-9).count(),
            compared: excess.len(),
            max_excess: excess.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            optimal_start_values: Summary::of(&optimal_start).expect("nonempty starts"),
        })
    } else {
        None
    };

    let completed = runs.iter().filter(|(_, r)| r.collected_all(n_items)).count();
    let returns: Vec<f64> = runs.iter().map(|(_, r)| r.trajectory.total_return).collect();
    let report = TemporalReport {
        n_items,
        temperature: tau.value(),
        episodes: config.episodes,
        max_steps,
        completed,
        completion_rate: completed as f64 / config.episodes as f64,
        longest_episode: runs.iter().map(|(_, r)| r.trajectory.len()).max().unwrap_or(0),
        returns: Summary::of(&returns).expect("at least one episode"),
        baseline,
    };
    out.finish("temporal", config, &report)?;
    Ok(report)
}
