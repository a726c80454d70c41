//! Acceptance suite: one pass/fail line per criterion.
//!
//! Failures listed in the README's "Known failures" section print as
//! `FAIL (documented)` and do not fail the run; any other failure does.

use std::collections::BTreeSet;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::Instant;

use rand::Rng;
use softcompose::generate::{random_mdp, RandomMdpSpec};
use softcompose::gridworld::{
    build_task_library, random_instance, rollout_with_rng, GridSpec, GridTask, Layout, DEFAULT_FOREIGN_GOAL_REWARD,
};
use softcompose::rng::{episode_rng, seeded};
use softcompose::solver::{greedy_policy, q_from_v, QLearningConfig};
use softcompose::*;
use softcompose_cli::commands::{self, epsilon_for};
use softcompose_cli::config::{ComposeMode, LayoutConfig, PolicySpec};
use softcompose_cli::{ExperimentConfig, RunOptions};

enum Outcome {
    Pass(String),
    Fail(String),
    /// A failure recorded under "Known failures" in the README.
    Documented(String),
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

const SEEDS: u64 = 20;

fn weights(n: usize, seed: u64) -> WeightVector {
    let mut rng = seeded(seed ^ 0x5eed);
    WeightVector::normalized((0..n).map(|_| rng.gen_range(0.05..1.0)).collect()).unwrap()
}

struct Instance {
    library: TaskLibrary,
    q: Vec<QTable>,
}

fn instance(seed: u64, tau: f64) -> Result<Instance> {
    let (layout, tasks) = random_instance(seed, 10)?;
    let tau = Temperature::new(tau)?;
    let library = build_task_library(&layout, &tasks, tau, DEFAULT_FOREIGN_GOAL_REWARD)?;
    let q = (0..library.len())
        .map(|k| {
            Ok(solve(
                &library.task_mdp(k)?,
                library.reference(),
                tau,
                &SolveOptions::default(),
            )?
            .q)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Instance { library, q })
}

fn criterion1_tau(seed: u64) -> f64 {
    [0.25, 0.5, 1.0][seed as usize % 3]
}

fn or_optimality() -> Result<Outcome> {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for seed in 0..SEEDS {
        let inst = instance(seed, criterion1_tau(seed))?;
        let w = weights(inst.library.len(), seed);
        let tau = inst.library.temperature();
        let composed = compose_or(&inst.q, &w, tau)?;
        let mdp = inst
            .library
            .build_composite_reward_mdp(&inst.library.composite_or_rewards(&w)?)?;
        let direct = solve(&mdp, inst.library.reference(), tau, &SolveOptions::default())?;
        worst = worst.max(composed.sup_norm_diff(&direct.q));
    }
    let secs = start.elapsed().as_secs_f64();
    Ok(check(
        worst <= 1e-6 && secs <= 60.0,
        format!("max |compose_or - direct| = {worst:.2e} over {SEEDS} libraries in {secs:.1} s"),
    ))
}

fn max_limit() -> Result<Outcome> {
    let mut worst_ratio: f64 = 0.0;
    let mut worst_union: f64 = 0.0;
    let opts = SolveOptions::default();
    for seed in 0..SEEDS {
        for tau in [1.0, 0.1, 0.01] {
            let inst = instance(seed, tau)?;
            let w = weights(inst.library.len(), seed);
            let gap = compose_or(&inst.q, &w, inst.library.temperature())?.sup_norm_diff(&compose_max(&inst.q)?);
            worst_ratio = worst_ratio.max(gap / (tau * (1.0 / w.min_positive()).ln()));
        }
        let (layout, tasks) = random_instance(seed, 10)?;
        let library = build_task_library(&layout, &tasks, Temperature::ZERO, DEFAULT_FOREIGN_GOAL_REWARD)?;
        let q = (0..library.len())
            .map(|k| Ok(standard_value_iteration(&library.task_mdp(k)?, &opts, None)?.q))
            .collect::<Result<Vec<_>>>()?;
        let union = library.build_composite_reward_mdp(&library.max_rewards())?;
        let direct = standard_value_iteration(&union, &opts, None)?;
        worst_union = worst_union.max(compose_max(&q)?.sup_norm_diff(&direct.q));
    }
    Ok(check(
        worst_ratio <= 1.0 + 1e-9 && worst_union <= 1e-6,
        format!("worst gap / (tau log(1/w_min)) = {worst_ratio:.3}; max |compose_max - union VI| = {worst_union:.2e}"),
    ))
}

fn monotone_limit() -> Result<Outcome> {
    let opts = SolveOptions::default();
    let mut ok = true;
    let mut gaps_out = Vec::new();
    for seed in 0..5 {
        let (layout, tasks) = random_instance(100 + seed, 10)?;
        let mdp = gridworld::build_mdp(&layout, &tasks[0])?;
        let reference = StochasticPolicy::uniform(mdp.n_states(), mdp.n_actions());
        let hard = standard_value_iteration(&mdp, &opts, None)?.q;
        let mut prev: Option<(QTable, f64)> = None;
        let mut gaps = Vec::new();
        for tau in [1.0, 0.5, 0.25, 0.125, 0.0625] {
            let q = solve(&mdp, &reference, Temperature::new(tau)?, &opts)?.q;
            let gap = q.sup_norm_diff(&hard);
            if let Some((p, pg)) = &prev {
                ok &= q.as_slice().iter().zip(p.as_slice()).all(|(a, b)| a >= &(b - 1e-9));
                ok &= gap < *pg;
            }
            gaps.push(gap);
            prev = Some((q, gap));
        }
        gaps_out.push(format!("{:.3}->{:.3}", gaps[0], gaps[4]));
    }
    Ok(check(
        ok,
        format!("nondecreasing, gap to Q*_0 per task: {}", gaps_out.join(", ")),
    ))
}

fn counterexample() -> Result<Outcome> {
    let mut ok = true;
    let mut parts = Vec::new();
    for tau in [0.1, 0.5, 1.0, 2.0] {
        let row = commands::counterexample_row(tau).map_err(|e| Error::InvalidMdp(e.to_string()))?;
        ok &= row.gap > 0.0 && row.epsilon < row.bound && (row.v_pi - (-1.0 - tau * 2f64.ln())).abs() <= 1e-10;
        ok &= row.epsilon == epsilon_for(tau);
        if tau == 1.0 {
            ok &= (row.v_star - (-(2.0 * std::f64::consts::E - 1.0).ln())).abs() <= 1e-9;
        }
        parts.push(format!("tau {tau}: eps {:.2e}, gap {:.2e}", row.epsilon, row.gap));
    }
    Ok(check(ok, parts.join("; ")))
}

fn solver_agreement() -> Result<Outcome> {
    let opts = SolveOptions::default();
    let mut worst: f64 = 0.0;
    let mut stochastic = 0;
    for seed in 0..10u64 {
        let spec = RandomMdpSpec {
            n_states: 8 + (seed as usize % 5) * 4,
            n_actions: 2 + seed as usize % 3,
            branching: if seed.is_multiple_of(5) { 3 } else { 1 },
            n_absorbing: 1 + seed as usize % 3,
        };
        let mdp = random_mdp(spec, seed)?;
        stochastic += usize::from(!mdp.is_deterministic());
        let reference = StochasticPolicy::uniform(mdp.n_states(), mdp.n_actions());
        let tau = Temperature::new(0.5)?;
        let vi = soft_value_iteration(&mdp, &reference, tau, &opts, None)?;
        let pi = soft_policy_iteration(&mdp, &reference, tau, &reference, &opts)?;
        worst = worst.max(vi.q.sup_norm_diff(&pi.q));
    }
    let chain = TabularMdp::two_state_chain();
    let reference = StochasticPolicy::uniform(2, 2);
    let tau = Temperature::new(1.0)?;
    let exact = solve(&chain, &reference, tau, &opts)?.q;
    let learned = soft_q_learning(&chain, &reference, &QLearningConfig::new(tau, 50_000, 0))?;
    let q_gap = learned.sup_norm_diff(&exact);
    Ok(check(
        worst <= 1e-8 && stochastic >= 1 && q_gap <= 0.05,
        format!(
            "PI vs VI {worst:.2e} on 10 MDPs ({stochastic} stochastic); Q-learning gap {q_gap:.2e} after 50k episodes"
        ),
    ))
}

fn desirability_fixed_point() -> Result<Outcome> {
    let mut worst: f64 = 0.0;
    for seed in 0..SEEDS {
        let inst = instance(seed, criterion1_tau(seed))?;
        let tau = inst.library.temperature();
        for (k, q) in inst.q.iter().enumerate() {
            let z = desirability(q, tau)?;
            worst = worst.max(desirability_residual(
                &inst.library,
                &inst.library.task_rewards()[k],
                &z,
            )?);
        }
        let w = weights(inst.library.len(), seed);
        let z = desirability(&compose_or(&inst.q, &w, tau)?, tau)?;
        worst = worst.max(desirability_residual(
            &inst.library,
            &inst.library.composite_or_rewards(&w)?,
            &z,
        )?);
    }
    Ok(check(
        worst <= 1e-6,
        format!("max residual {worst:.2e} over solved and composed tables"),
    ))
}

/// Largest amount by which `lhs >= rhs` fails.
fn violation(lhs: &[f64], rhs: &[f64]) -> f64 {
    lhs.iter()
        .zip(rhs)
        .map(|(l, r)| r - l)
        .fold(f64::NEG_INFINITY, f64::max)
}

fn and_sandwich() -> Result<Outcome> {
    let tau = Temperature::new(0.5)?;
    let opts = SolveOptions::default();
    let (mut upper, mut lower, mut policy) = (f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    let mut converged = true;
    let (mut reached, mut episodes) = (0usize, 0usize);
    for seed in 0..5u64 {
        let layout = Layout::sample_full(GridSpec::open(10, 10, seed)?)?;
        let tasks = [GridTask::parse("Blue")?, GridTask::parse("Square")?];
        let library = build_task_library(&layout, &tasks, tau, DEFAULT_FOREIGN_GOAL_REWARD)?;
        let q1 = solve(&library.task_mdp(0)?, library.reference(), tau, &opts)?.q;
        let q2 = solve(&library.task_mdp(1)?, library.reference(), tau, &opts)?.q;
        let mdp = library.build_composite_reward_mdp(&library.mean_rewards())?;
        let q_star = solve(&mdp, library.reference(), tau, &opts)?.q;
        let b = and_bounds(&mdp, &q1, &q2, library.reference(), tau, &opts)?;
        upper = upper.max(violation(b.q_ave.as_slice(), q_star.as_slice()));
        match (&b.c_star, &b.f_star) {
            (Some(c), Some(f)) => {
                let low = b.q_ave.zip_map(c, |q, c| q - c)?;
                lower = lower.max(violation(q_star.as_slice(), low.as_slice()));
                let q_pi = q_from_v(
                    &mdp,
                    &policy_evaluation(&mdp, &b.pi_ave, library.reference(), tau, &opts)?,
                )?;
                let floor = q_star.zip_map(f, |q, f| q - f)?;
                policy = policy.max(violation(q_pi.as_slice(), floor.as_slice()));
            }
            _ => converged = false,
        }
        let target: BTreeSet<usize> = GridTask::parse("BlueSquare")?
            .goal_cells(&layout)
            .iter()
            .filter_map(|&c| layout.grid().state_of(c))
            .collect();
        let greedy = greedy_policy(&b.q_ave);
        let starts = layout.start_states();
        for i in 0..1000u64 {
            let mut rng = episode_rng(seed, i);
            let start = starts[rng.gen_range(0..starts.len())];
            let run = rollout_with_rng(&mdp, &greedy, start, 1000, &mut rng)?;
            reached += usize::from(run.exit_state().is_some_and(|s| target.contains(&s)));
            episodes += 1;
        }
    }
    let reach = reached as f64 / episodes as f64;
    let detail = format!(
        "upper violation {upper:.1e}, C violation {lower:.2}, F violation {policy:.2}, greedy reach {:.1}%",
        100.0 * reach
    );
    if !(upper <= 1e-8 && converged) {
        return Ok(Outcome::Fail(detail));
    }
    if lower <= 1e-8 && policy <= 1e-8 && reach >= 0.9 {
        Ok(Outcome::Pass(detail))
    } else {
        Ok(Outcome::Documented(detail))
    }
}

fn sweep_layout() -> LayoutConfig {
    LayoutConfig {
        width: 10,
        height: 10,
        random_walls: 8,
        rng_seed: 3,
        ..LayoutConfig::default()
    }
}

fn weight_sweep(dir: &Path) -> Result<Outcome> {
    let config = ExperimentConfig {
        layout: sweep_layout(),
        tasks: vec!["BeigeSquare".into(), "PurpleCircle".into()],
        temperature: 1.0,
        runs: 80,
        episodes: 100,
        weight_step: 0.05,
        ..ExperimentConfig::default()
    };
    let report = commands::sweep(&RunOptions::new(config, dir.join("sweep"))).map_err(cli)?;
    let ok = report.greedy_at_zero == [0.0, 1.0] && report.greedy_at_one == [1.0, 0.0] && report.spearman >= 0.9;
    Ok(check(
        ok,
        format!(
            "greedy w=0 {:?}, w=1 {:?}; Spearman {:.3} over {} weights",
            report.greedy_at_zero,
            report.greedy_at_one,
            report.spearman,
            report.points.len()
        ),
    ))
}

fn temporal(dir: &Path) -> Result<Outcome> {
    let config = ExperimentConfig {
        layout: sweep_layout(),
        temperature: 0.0,
        episodes: 1000,
        ..ExperimentConfig::default()
    };
    let mut opts = RunOptions::new(config, dir.join("temporal"));
    opts.baseline = true;
    let report = commands::temporal(&opts).map_err(cli)?;
    let baseline = report.baseline.expect("baseline requested");
    Ok(check(
        report.completion_rate == 1.0 && report.max_steps == 600 && baseline.violations == 0,
        format!(
            "{} of {} episodes collected all {} items (longest {} steps, cap {}); {} of {} above the collect-all optimum",
            report.completed,
            report.episodes,
            report.n_items,
            report.longest_episode,
            report.max_steps,
            baseline.violations,
            baseline.compared
        ),
    ))
}

fn cli(e: softcompose_cli::CliError) -> Error {
    Error::InvalidMdp(e.to_string())
}

fn run_binary(command: &str, config: &Path, out: &Path, extra: &[&str]) -> bool {
    Command::new(env!("CARGO_BIN_EXE_softcompose"))
        .arg(command)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(extra)
        .status()
        .map(|s| s.success())
        .unwrap_or(false)
}

fn same_tree(a: &Path, b: &Path) -> std::io::Result<Option<String>> {
    let mut names: Vec<_> = std::fs::read_dir(a)?
        .map(|e| e.map(|e| e.file_name()))
        .collect::<std::io::Result<_>>()?;
    names.sort();
    let mut other: Vec<_> = std::fs::read_dir(b)?
        .map(|e| e.map(|e| e.file_name()))
        .collect::<std::io::Result<_>>()?;
    other.sort();
    if names != other {
        return Ok(Some("different file sets".into()));
    }
    for name in names {
        if std::fs::read(a.join(&name))? != std::fs::read(b.join(&name))? {
            return Ok(Some(name.to_string_lossy().into_owned()));
        }
    }
    Ok(None)
}

fn determinism(dir: &Path) -> Result<Outcome> {
    let base = ExperimentConfig {
        layout: LayoutConfig {
            width: 8,
            height: 7,
            random_walls: 5,
            rng_seed: 5,
            ..LayoutConfig::default()
        },
        tasks: vec!["Purple".into(), "Blue".into()],
        temperature: 0.5,
        episodes: 50,
        runs: 4,
        weight_step: 0.25,
        seed: 17,
        ..ExperimentConfig::default()
    };
    let lib = dir.join("det_library");
    let mut runs: Vec<(&str, ExperimentConfig, Vec<&str>)> = vec![
        ("solve", base.clone(), vec![]),
        (
            "solve",
            ExperimentConfig {
                learning: softcompose_cli::config::LearningConfig {
                    episodes: 2000,
                    ..Default::default()
                },
                ..base.clone()
            },
            vec!["--learn"],
        ),
        (
            "compose",
            ExperimentConfig {
                library_dir: Some(lib.clone()),
                ..base.clone()
            },
            vec![],
        ),
        (
            "compose",
            ExperimentConfig {
                library_dir: Some(lib.clone()),
                mode: ComposeMode::And,
                ..base.clone()
            },
            vec![],
        ),
        ("sweep", base.clone(), vec![]),
        (
            "temporal",
            ExperimentConfig {
                temperature: 0.0,
                ..base.clone()
            },
            vec!["--baseline"],
        ),
        ("temporal", base.clone(), vec![]),
        (
            "counterexample",
            ExperimentConfig {
                temperatures: Some(vec![0.1, 1.0]),
                ..base.clone()
            },
            vec![],
        ),
    ];
    runs.push((
        "eval",
        ExperimentConfig {
            eval_task: Some("PurpleOrBlue".into()),
            policies: vec![
                PolicySpec::Table {
                    name: "purple".into(),
                    path: lib.join("q_Purple.csv"),
                },
                PolicySpec::Uniform { name: "random".into() },
            ],
            ..base.clone()
        },
        vec![],
    ));
    if !run_binary("solve", &write(dir, "det_library.json", &base)?, &lib, &[]) {
        return Ok(Outcome::Fail("library solve failed".into()));
    }
    let mut failures = Vec::new();
    for (i, (command, config, extra)) in runs.iter().enumerate() {
        let path = write(dir, &format!("det_{i}.json"), config)?;
        let (a, b) = (dir.join(format!("det_{i}_a")), dir.join(format!("det_{i}_b")));
        if !(run_binary(command, &path, &a, extra) && run_binary(command, &path, &b, extra)) {
            failures.push(format!("{command} exited with an error"));
            continue;
        }
        if let Some(file) = same_tree(&a, &b)? {
            failures.push(format!("{command}: {file} differs"));
        }
    }
    let detail = if failures.is_empty() {
        format!("{} command runs reproduced byte for byte", runs.len())
    } else {
        failures.join("; ")
    };
    Ok(check(failures.is_empty(), detail))
}

fn write(dir: &Path, name: &str, config: &ExperimentConfig) -> Result<std::path::PathBuf> {
    let path = dir.join(name);
    std::fs::write(&path, serde_json::to_string_pretty(config)?)?;
    Ok(path)
}

type Criterion<'a> = Box<dyn Fn() -> Result<Outcome> + 'a>;

fn main() -> ExitCode {
    let dir = tempfile::tempdir().expect("temporary directory");
    let criteria: Vec<(&str, Criterion)> = vec![
        ("OR-optimality", Box::new(or_optimality)),
        ("max limit", Box::new(max_limit)),
        ("monotone limit", Box::new(monotone_limit)),
        ("counterexample", Box::new(counterexample)),
        ("solver agreement", Box::new(solver_agreement)),
        ("desirability fixed point", Box::new(desirability_fixed_point)),
        ("AND sandwich", Box::new(and_sandwich)),
        ("weight sweep", Box::new(|| weight_sweep(dir.path()))),
        ("temporal", Box::new(|| temporal(dir.path()))),
        ("determinism", Box::new(|| determinism(dir.path()))),
    ];
    let mut unexpected = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run().unwrap_or_else(|e| Outcome::Fail(format!("error: {e}")));
        let secs = start.elapsed().as_secs_f64();
        let (label, detail) = match &outcome {
            Outcome::Pass(d) => ("PASS", d),
            Outcome::Fail(d) => {
                unexpected += 1;
                ("FAIL", d)
            }
            Outcome::Documented(d) => ("FAIL (documented)", d),
        };
        println!("criterion {:>2} {name}: {label}: {detail} [{secs:.1} s]", i + 1);
    }
    if unexpected == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{unexpected} unexpected failure(s)");
        ExitCode::FAILURE
    }
}
