use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use softcompose::gridworld::{build_mdp, GridTask, Trajectory};
use softcompose::io::read_q_csv;
use softcompose::{standard_value_iteration, StochasticPolicy, Temperature};

use super::{acting_policy, coords, seeded_episode, start_states, RunOptions};
use crate::config::PolicySpec;
use crate::error::{CliError, CliResult, Context};
use crate::report::Output;
use crate::stats::Summary;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyReturns {
    pub name: String,
    pub returns: Vec<f64>,
    pub summary: Summary,
    /// Episodes cut off at the step cap; their partial return is kept.
    pub truncated: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub eval_task: String,
    pub temperature: f64,
    pub episodes: usize,
    pub max_steps: usize,
    pub policies: Vec<PolicyReturns>,
    /// Optimal (tau = 0) values over the start cells, for reference.
    pub optimal_start_values: Summary,
}

/// Seeded episodes of each configured policy on the evaluation task. Every
/// policy sees the same sequence of start cells.
pub fn eval(opts: &RunOptions) -> CliResult<EvalReport> {
    let config = &opts.config;
    let task_name = config
        .eval_task
        .as_deref()
        .ok_or_else(|| CliError::validation("eval needs eval_task"))?;
    if config.policies.is_empty() {
        return Err(CliError::validation("eval needs at least one policy"));
    }
    let layout = config.layout.build()?;
    let mdp = build_mdp(&layout, &GridTask::parse(task_name)?)?;
    let tau = Temperature::new(config.eval_temperature.unwrap_or(config.temperature))?;
    let starts = start_states(&layout)?;
    let max_steps = config.max_steps_or(20 * layout.grid().n_cells());
    let optimal = standard_value_iteration(&mdp, &config.solve_options(), None)?;
    let optimal_start: Vec<f64> = starts.iter().map(|&s| optimal.value.get(s)).collect();

    let mut out = Output::create(&opts.out)?;
    let mut writer = csv::Writer::from_path(out.file("returns.csv"))?;
    writer.write_record(["policy", "episode", "start_x", "start_y", "return", "steps", "terminal"])?;
    let mut policies = Vec::with_capacity(config.policies.len());
    for spec in &config.policies {
        let policy = match spec {
            PolicySpec::Uniform { .. } => StochasticPolicy::uniform(mdp.n_states(), mdp.n_actions()),
            PolicySpec::Table { name, path } => {
                let q = read_q_csv(path).context(name)?;
                if q.shape() != (mdp.n_states(), mdp.n_actions()) {
                    return Err(CliError::validation(format!(
                        "Q-table of {name} does not fit the layout"
                    )));
                }
                acting_policy(&q, tau)?
            }
        };
        let episodes: Vec<Trajectory> = (0..config.episodes as u64)
            .into_par_iter()
            .map(|i| seeded_episode(&mdp, &policy, &starts, max_steps, config.seed, i))
            .collect::<CliResult<_>>()?;
        for (i, ep) in episodes.iter().enumerate() {
            let (x, y) = coords(&layout, ep.start());
            writer.write_record([
                spec.name().to_string(),
                i.to_string(),
                x.to_string(),
                y.to_string(),
                ep.total_return.to_string(),
                ep.len().to_string(),
                ep.terminal.to_string(),
            ])?;
        }
        let returns: Vec<f64> = episodes.iter().map(|e| e.total_return).collect();
        policies.push(PolicyReturns {
            name: spec.name().to_string(),
            summary: Summary::of(&returns).expect("at least one episode"),
            truncated: episodes.iter().filter(|e| !e.terminal).count(),
            returns,
        });
    }
    writer.flush()?;
    drop(writer);

    let mut summary = csv::Writer::from_path(out.file("summary.csv"))?;
    summary.write_record([
        "policy",
        "count",
        "mean",
        "median",
        "lower_quartile",
        "upper_quartile",
        "min",
        "max",
        "truncated",
    ])?;
    for p in &policies {
        let s = &p.summary;
        summary.write_record([
            p.name.clone(),
            s.count.to_string(),
            s.mean.to_string(),
            s.median.to_string(),
            s.lower_quartile.to_string(),
            s.upper_quartile.to_string(),
            s.min.to_string(),
            s.max.to_string(),
            p.truncated.to_string(),
        ])?;
    }
    summary.flush()?;

    let report = EvalReport {
        eval_task: task_name.to_string(),
        temperature: tau.value(),
        episodes: config.episodes,
        max_steps,
        policies,
        optimal_start_values: Summary::of(&optimal_start).expect("nonempty starts"),
    };
    out.finish("eval", config, &report)?;
    Ok(report)
}
