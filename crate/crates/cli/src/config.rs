//! JSON experiment configuration shared by every command.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use softcompose::gridworld::{Cell, GridSpec, GridTask, Item, Layout, DEFAULT_FOREIGN_GOAL_REWARD};
use softcompose::solver::LearningRate;
use softcompose::{SolveOptions, Temperature, WeightVector};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LayoutConfig {
    pub width: usize,
    pub height: usize,
    pub walls: Vec<Cell>,
    /// Extra walls placed at random (keeping the grid connected).
    pub random_walls: usize,
    /// Seeds random walls and item placement.
    pub rng_seed: u64,
    /// Explicit items; the six-item set is sampled when absent.
    pub items: Option<Vec<Item>>,
}

impl Default for LayoutConfig {
    fn default() -> Self {
        LayoutConfig {
            width: 10,
            height: 10,
            walls: Vec::new(),
            random_walls: 0,
            rng_seed: 0,
            items: None,
        }
    }
}

impl LayoutConfig {
    pub fn build(&self) -> CliResult<Layout> {
        let mut grid = GridSpec::with_random_walls(self.width, self.height, self.random_walls, self.rng_seed)?;
        if !self.walls.is_empty() {
            let mut walls = grid.walls().to_vec();
            walls.extend(self.walls.iter().copied());
            grid = GridSpec::new(self.width, self.height, walls, self.rng_seed)?;
        }
        Ok(match &self.items {
            Some(items) => Layout::new(grid, items.clone())?,
            None => Layout::sample_full(grid)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ComposeMode {
    #[default]
    Or,
    Max,
    And,
}

/// Where an evaluated policy's Q-table comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase", deny_unknown_fields)]
pub enum PolicySpec {
    /// A Q-table CSV written by `solve` or `compose`.
    Table { name: String, path: PathBuf },
    /// Uniformly random actions.
    Uniform { name: String },
}

impl PolicySpec {
    pub fn name(&self) -> &str {
        match self {
            PolicySpec::Table { name, .. } | PolicySpec::Uniform { name } => name,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LearningConfig {
    pub episodes: usize,
    pub max_steps: usize,
    pub rate: LearningRate,
    /// Exploration rate used when `temperature` is 0.
    pub epsilon: f64,
}

impl Default for LearningConfig {
    fn default() -> Self {
        LearningConfig {
            episodes: 50_000,
            max_steps: 1000,
            rate: LearningRate::default(),
            epsilon: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub layout: LayoutConfig,
    pub tasks: Vec<String>,
    pub temperature: f64,
    /// Composition weights; uniform when absent.
    pub weights: Option<Vec<f64>>,
    pub episodes: usize,
    /// Episode step cap; a per-command multiple of the grid size when absent.
    pub max_steps: Option<usize>,
    pub tolerance: f64,
    pub max_iter: usize,
    pub seed: u64,
    /// Reward for reaching another library task's goal.
    pub foreign_goal_reward: f64,
    /// Overridden by `--out`.
    #[serde(skip_serializing)]
    pub output_dir: Option<PathBuf>,

    pub mode: ComposeMode,
    /// Output directory of a previous `solve` run.
    pub library_dir: Option<PathBuf>,

    pub eval_task: Option<String>,
    pub policies: Vec<PolicySpec>,
    /// Action-selection temperature for `eval`; `temperature` when absent.
    pub eval_temperature: Option<f64>,

    pub weight_step: f64,
    /// Sweep repetitions per weight, each of `episodes` episodes.
    pub runs: usize,

    /// Counterexample temperatures; `[temperature]` when absent.
    pub temperatures: Option<Vec<f64>>,

    /// Trajectory overlays written by `temporal`.
    pub trajectories: usize,

    pub learning: LearningConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            layout: LayoutConfig::default(),
            tasks: Vec::new(),
            temperature: 1.0,
            weights: None,
            episodes: 1000,
            max_steps: None,
            tolerance: 1e-10,
            max_iter: 100_000,
            seed: 0,
            foreign_goal_reward: DEFAULT_FOREIGN_GOAL_REWARD,
            output_dir: None,
            mode: ComposeMode::Or,
            library_dir: None,
            eval_task: None,
            policies: Vec::new(),
            eval_temperature: None,
            weight_step: 0.05,
            runs: 80,
            temperatures: None,
            trajectories: 3,
            learning: LearningConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::validation(format!("cannot read config {}: {e}", path.display())))?;
        let config: ExperimentConfig =
            serde_json::from_str(&text).map_err(|e| CliError::validation(format!("config {}: {e}", path.display())))?;
        config.check()?;
        Ok(config)
    }

    /// Field checks that do not depend on the command.
    pub fn check(&self) -> CliResult<()> {
        if self.episodes == 0 {
            return Err(CliError::validation("episodes must be at least 1"));
        }
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return Err(CliError::validation("tolerance must be positive"));
        }
        if self.max_iter == 0 {
            return Err(CliError::validation("max_iter must be at least 1"));
        }
        if !self.foreign_goal_reward.is_finite() {
            return Err(CliError::validation("foreign_goal_reward must be finite"));
        }
        Temperature::new(self.temperature)?;
        if let Some(t) = self.eval_temperature {
            Temperature::new(t)?;
        }
        if let Some(w) = &self.weights {
            WeightVector::new(w.clone())?;
        }
        Ok(())
    }

    pub fn temperature(&self) -> CliResult<Temperature> {
        Ok(Temperature::new(self.temperature)?)
    }

    pub fn solve_options(&self) -> SolveOptions {
        SolveOptions::default()
            .with_tol(self.tolerance)
            .with_max_iter(self.max_iter)
    }

    pub fn parsed_tasks(&self) -> CliResult<Vec<GridTask>> {
        if self.tasks.is_empty() {
            return Err(CliError::validation("no tasks given"));
        }
        Ok(self
            .tasks
            .iter()
            .map(|t| GridTask::parse(t))
            .collect::<softcompose::Result<Vec<_>>>()?)
    }

    /// Weights for `n` tasks: the configured vector or uniform.
    pub fn weights_for(&self, n: usize) -> CliResult<WeightVector> {
        match &self.weights {
            Some(w) if w.len() != n => Err(CliError::validation(format!("{} weights given for {n} tasks", w.len()))),
            Some(w) => Ok(WeightVector::new(w.clone())?),
            None => Ok(WeightVector::uniform(n)?),
        }
    }

    pub fn max_steps_or(&self, default: usize) -> usize {
        self.max_steps.unwrap_or(default)
    }
}
