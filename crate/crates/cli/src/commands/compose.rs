use std::path::Path;

use serde::{Deserialize, Serialize};
use softcompose::gridworld::{render_value_heatmap, Layout};
use softcompose::io::{read_json, read_q_csv, write_json, write_policy_csv, write_q_csv, write_v_csv, LibraryDocument};
use softcompose::solver::{induced_policy, q_from_v, state_values};
use softcompose::{
    and_bounds, compose_and_average, compose_max, compose_or, compose_or_reward, desirability, desirability_residual,
    policy_evaluation, solve, standard_value_iteration, QTable, RewardTable, TaskLibrary,
};

use super::{task_file_stem, RunOptions};
use crate::config::ComposeMode;
use crate::error::{CliError, CliResult, Context};
use crate::report::Output;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComposeReport {
    pub mode: ComposeMode,
    pub tasks: Vec<String>,
    pub temperature: f64,
    pub weights: Option<Vec<f64>>,
    /// Sup-norm gap to a direct solve of the task the composition targets:
    /// the composite reward (or), the union reward (max) or the mean reward (and).
    pub oracle_gap: f64,
    /// Fixed-point residual of the composed desirability (or mode, when representable).
    pub desirability_residual: Option<f64>,
    pub and_bounds: Option<AndSummary>,
}

/// Entrywise checks of the AND sandwich against the directly solved mean-reward task.
/// Violations are `max(rhs - lhs)`; nonpositive means the inequality holds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AndSummary {
    pub upper_violation: f64,
    pub lower_violation: Option<f64>,
    pub policy_violation: Option<f64>,
    pub c_star_max: Option<f64>,
    pub f_star_max: Option<f64>,
    pub max_divergence: f64,
    pub unbounded: bool,
}

pub fn compose(opts: &RunOptions) -> CliResult<ComposeReport> {
    let config = &opts.config;
    let dir = config
        .library_dir
        .as_deref()
        .ok_or_else(|| CliError::validation("compose needs library_dir"))?;
    let library = load_library(dir)?;
    let layout: Layout = read_json(&dir.join("layout.json")).context("layout.json")?;
    let names: Vec<String> = if config.tasks.is_empty() {
        library.task_names().to_vec()
    } else {
        config.tasks.clone()
    };
    let mut indices = Vec::with_capacity(names.len());
    let mut q_list = Vec::with_capacity(names.len());
    for name in &names {
        let k = library
            .task_index(name)
            .ok_or_else(|| CliError::validation(format!("task {name} is not in the library")))?;
        let q = read_q_csv(&dir.join(format!("q_{}.csv", task_file_stem(name)))).context(name)?;
        if q.shape() != (library.base().n_states(), library.base().n_actions()) {
            return Err(CliError::validation(format!(
                "Q-table of {name} does not match the library"
            )));
        }
        indices.push(k);
        q_list.push(q);
    }
    let rewards: Vec<RewardTable> = indices.iter().map(|&k| library.task_rewards()[k].clone()).collect();
    let tau = library.temperature();
    let solver_opts = config.solve_options();
    let reference = library.reference();
    let mut out = Output::create(&opts.out)?;

    let mut report = ComposeReport {
        mode: config.mode,
        tasks: names.clone(),
        temperature: tau.value(),
        weights: None,
        oracle_gap: f64::NAN,
        desirability_residual: None,
        and_bounds: None,
    };
    let composed = match config.mode {
        ComposeMode::Or => {
            if tau.is_zero() {
                return Err(CliError::validation(
                    "or mode needs a library solved at tau > 0; use max",
                ));
            }
            let w = config.weights_for(q_list.len())?;
            let composed = compose_or(&q_list, &w, tau)?;
            let r = compose_or_reward(&rewards, library.base().absorbing_mask(), &w, tau)?;
            write_q_csv(&out.file("r_composed.csv"), &r)?;
            let mdp = library.build_composite_reward_mdp(&r)?;
            let direct = solve(&mdp, reference, tau, &solver_opts).context("composite reward")?;
            report.oracle_gap = composed.sup_norm_diff(&direct.q);
            report.desirability_residual = desirability(&composed, tau)
                .and_then(|z| desirability_residual(&library, &r, &z))
                .ok();
            report.weights = Some(w.as_slice().to_vec());
            composed
        }
        ComposeMode::Max => {
            let composed = compose_max(&q_list)?;
            let union = fold(&rewards, f64::max);
            let mdp = library.build_composite_reward_mdp(&union)?;
            let direct = standard_value_iteration(&mdp, &solver_opts, None).context("union reward")?;
            report.oracle_gap = composed.sup_norm_diff(&direct.q);
            composed
        }
        ComposeMode::And => {
            if q_list.len() != 2 {
                return Err(CliError::validation(format!(
                    "and mode needs two tasks, got {}",
                    q_list.len()
                )));
            }
            let composed = compose_and_average(&q_list)?;
            let mean = fold(&rewards, |a, b| a + b).map(|x| x / 2.0);
            let mdp = library.build_composite_reward_mdp(&mean)?;
            let direct = solve(&mdp, reference, tau, &solver_opts).context("mean reward")?;
            report.oracle_gap = composed.sup_norm_diff(&direct.q);
            if !tau.is_zero() {
                let bounds = and_bounds(&mdp, &q_list[0], &q_list[1], reference, tau, &solver_opts)?;
                let v_pi = policy_evaluation(&mdp, &bounds.pi_ave, reference, tau, &solver_opts)?;
                let q_pi = q_from_v(&mdp, &v_pi)?;
                let q_star = direct.q.as_slice();
                let minus = |a: &QTable, b: &QTable| a.zip_map(b, |x, y| x - y).expect("same shape");
                report.and_bounds = Some(AndSummary {
                    upper_violation: violation(bounds.q_ave.as_slice(), q_star),
                    lower_violation: bounds
                        .c_star
                        .as_ref()
                        .map(|c| violation(q_star, minus(&bounds.q_ave, c).as_slice())),
                    policy_violation: bounds
                        .f_star
                        .as_ref()
                        .map(|f| violation(q_pi.as_slice(), minus(&direct.q, f).as_slice())),
                    c_star_max: bounds.c_star.as_ref().map(max_entry),
                    f_star_max: bounds.f_star.as_ref().map(max_entry),
                    max_divergence: bounds.divergence.iter().copied().fold(0.0, f64::max),
                    unbounded: bounds.unbounded,
                });
                if let Some(c) = &bounds.c_star {
                    write_q_csv(&out.file("c_star.csv"), c)?;
                }
                if let Some(f) = &bounds.f_star {
                    write_q_csv(&out.file("f_star.csv"), f)?;
                }
                write_json(&out.file("and_bounds.json"), &report.and_bounds)?;
            }
            composed
        }
    };

    let value = state_values(&composed, reference, tau)?;
    write_q_csv(&out.file("q_composed.csv"), &composed)?;
    write_v_csv(&out.file("v_composed.csv"), &value)?;
    write_policy_csv(
        &out.file("policy_composed.csv"),
        &induced_policy(&composed, reference, tau)?,
    )?;
    render_value_heatmap(&value, layout.grid(), &out.file("heatmap_composed.pgm"))?;
    out.file("heatmap_composed.csv");
    out.finish("compose", config, &report)?;
    Ok(report)
}

fn load_library(dir: &Path) -> CliResult<TaskLibrary> {
    let doc: LibraryDocument = read_json(&dir.join("library.json")).context("library.json")?;
    Ok(TaskLibrary::try_from(doc)?)
}

fn fold(tables: &[RewardTable], f: impl Fn(f64, f64) -> f64) -> RewardTable {
    let mut out = tables[0].clone();
    for t in &tables[1..] {
        out = out.zip_map(t, &f).expect("library tables share a shape");
    }
    out
}

/// Largest amount by which `lhs >= rhs` fails.
fn violation(lhs: &[f64], rhs: &[f64]) -> f64 {
    lhs.iter()
        .zip(rhs)
        .map(|(l, r)| r - l)
        .fold(f64::NEG_INFINITY, f64::max)
}

fn max_entry(q: &QTable) -> f64 {
    q.as_slice().iter().copied().fold(f64::NEG_INFINITY, f64::max)
}
