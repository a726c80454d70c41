//! Item-collection gridworld as exact tabular MDPs.
//!
//! The agent moves N/S/E/W on a walled grid holding coloured squares and
//! circles. Each step costs 0.1; acting on a cell holding a target item
//! collects it for +1 and ends the episode.

mod env;
mod layout;
mod render;
mod scenario;
mod task;
mod temporal;

pub use env::{
    build_mdp, build_task_library, rollout, rollout_with_rng, step, StepOutcome, Trajectory, Transition,
    DEFAULT_FOREIGN_GOAL_REWARD, GOAL_REWARD, STEP_REWARD,
};
pub use layout::{Action, Cell, Color, GridSpec, Item, Layout, Shape};
pub use render::{ascii, heatmap_levels, overlay_pixels, render_trajectory, render_value_heatmap, PATH_RED};
pub use scenario::{random_instance, BASE_TASKS};
pub use task::{GridTask, ItemPredicate};
pub use temporal::{collect_all_mdp, collect_all_values, TemporalAgent, TemporalTrajectory};
