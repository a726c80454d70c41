//! Continual collection: the agent keeps acting after each pickup, guided by
//! the composition of the per-item tasks that are still open.

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::env::{build_task_library, Trajectory, DEFAULT_FOREIGN_GOAL_REWARD, GOAL_REWARD, STEP_REWARD};
use super::layout::{Action, Layout};
use super::task::GridTask;
use crate::compose::{compose_max, compose_or, WeightVector};
use crate::error::{Error, Result};
use crate::mdp::TabularMdp;
use crate::numerics::{argmax, softmax_weights};
use crate::rng::{episode_rng, sample_index};
use crate::solver::{solve, standard_value_iteration, SolveOptions};
use crate::tables::{QTable, Temperature};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemporalTrajectory {
    pub trajectory: Trajectory,
    /// Item indices in pickup order.
    pub collected: Vec<usize>,
}

impl TemporalTrajectory {
    pub fn collected_all(&self, n_items: usize) -> bool {
        self.collected.len() == n_items
    }
}

/// Greedy (`tau = 0`, max-composition) or Boltzmann (`tau > 0`,
/// OR-composition with uniform weights) agent over the remaining items.
///
/// Each set of remaining items is solved once and cached.
#[derive(Debug, Clone)]
pub struct TemporalAgent {
    layout: Layout,
    tau: Temperature,
    opts: SolveOptions,
    cache: HashMap<u64, QTable>,
}

impl TemporalAgent {
    pub fn new(layout: Layout, tau: Temperature, opts: SolveOptions) -> Result<Self> {
        if layout.items().is_empty() {
            return Err(Error::Empty("item library"));
        }
        if layout.items().len() > 63 {
            return Err(Error::Layout("temporal mode supports at most 63 items".into()));
        }
        Ok(TemporalAgent {
            layout,
            tau,
            opts,
            cache: HashMap::new(),
        })
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    fn full_mask(&self) -> u64 {
        (1u64 << self.layout.items().len()) - 1
    }

    /// Composed Q-table of the items set in `mask`, on the layout holding only those items.
    pub fn composed_q(&mut self, mask: u64) -> Result<&QTable> {
        if mask == 0 || mask & !self.full_mask() != 0 {
            return Err(Error::Layout(format!("invalid item mask {mask:#b}")));
        }
        if !self.cache.contains_key(&mask) {
            let q = self.compose_remaining(mask)?;
            self.cache.insert(mask, q);
        }
        Ok(&self.cache[&mask])
    }

    fn compose_remaining(&self, mask: u64) -> Result<QTable> {
        let residual = self.layout.with_items(|i| mask & (1 << i) != 0);
        let tasks: Vec<GridTask> = residual.items().iter().map(GridTask::for_item).collect();
        let library = build_task_library(&residual, &tasks, self.tau, DEFAULT_FOREIGN_GOAL_REWARD)?;
        let q_list = (0..library.len())
            .map(|k| {
                let mdp = library.task_mdp(k)?;
                Ok(solve(&mdp, library.reference(), self.tau, &self.opts)?.q)
            })
            .collect::<Result<Vec<_>>>()?;
        if self.tau.is_zero() {
            compose_max(&q_list)
        } else {
            compose_or(&q_list, &WeightVector::uniform(q_list.len())?, self.tau)
        }
    }

    /// One episode from cell state `start`. Acting on a cell that holds an
    /// open item collects it for `GOAL_REWARD` and leaves the agent in place;
    /// every other action is a move costing `STEP_REWARD`.
    pub fn rollout(&mut self, start: usize, max_steps: usize, seed: u64) -> Result<TemporalTrajectory> {
        self.rollout_with_rng(start, max_steps, &mut episode_rng(seed, 0))
    }

    pub fn rollout_with_rng<R: Rng + ?Sized>(
        &mut self,
        start: usize,
        max_steps: usize,
        rng: &mut R,
    ) -> Result<TemporalTrajectory> {
        let grid = self.layout.grid().clone();
        let mut cell = grid.cell_of(start).ok_or(Error::InvalidState(start))?;
        let items = self.layout.items().to_vec();
        let mut mask = self.full_mask();
        let mut traj = Trajectory::empty(start);
        let mut collected = Vec::new();
        let tau = self.tau.value();
        let uniform = [1.0; Action::COUNT];
        while mask != 0 && traj.len() < max_steps {
            let s = grid.state_of(cell).expect("agent stays on free cells");
            let q = self.composed_q(mask)?;
            let action = if tau > 0.0 {
                let probs = softmax_weights(q.row(s), &uniform, tau).ok_or(Error::EmptySupport(s))?;
                sample_index(&probs, rng)
            } else {
                argmax(q.row(s))
            };
            let here = items
                .iter()
                .enumerate()
                .find(|(i, item)| mask & (1 << i) != 0 && item.cell == cell);
            let reward = if let Some((i, _)) = here {
                mask &= !(1 << i);
                collected.push(i);
                GOAL_REWARD
            } else {
                cell = grid.neighbour(cell, Action::from_index(action).expect("four actions"));
                STEP_REWARD
            };
            traj.steps.push(super::env::Transition {
                state: s,
                action,
                reward,
            });
            traj.total_return += reward;
            traj.final_state = grid.state_of(cell).expect("free");
        }
        traj.terminal = mask == 0;
        Ok(TemporalTrajectory {
            trajectory: traj,
            collected,
        })
    }
}

/// Product MDP over (cell, remaining items) whose optimum collects every
/// item. State `(mask - 1) * n_cells + cell` for nonempty masks; the virtual
/// goal is last.
pub fn collect_all_mdp(layout: &Layout) -> Result<TabularMdp> {
    let n_items = layout.items().len();
    if n_items == 0 {
        return Err(Error::Empty("item library"));
    }
    if n_items > 16 {
        return Err(Error::Layout("collect-all baseline supports at most 16 items".into()));
    }
    let grid = layout.grid();
    let n_cells = grid.n_cells();
    let n_masks = (1usize << n_items) - 1;
    let goal = n_masks * n_cells;
    let n_states = goal + 1;
    let index = |mask: usize, cell: usize| (mask - 1) * n_cells + cell;
    let mut next = Vec::with_capacity(n_states * Action::COUNT);
    let mut rewards = QTable::zeros(n_states, Action::COUNT);
    let mut absorbing = Vec::new();
    for mask in 1..=n_masks {
        for (s, &c) in grid.cells().iter().enumerate() {
            let here = layout
                .items()
                .iter()
                .enumerate()
                .find(|(i, item)| mask & (1 << i) != 0 && item.cell == c);
            let state = index(mask, s);
            if let Some((i, _)) = here {
                let rest = mask & !(1 << i);
                let target = if rest == 0 {
                    absorbing.push(state);
                    goal
                } else {
                    index(rest, s)
                };
                next.extend([target; Action::COUNT]);
                rewards.row_mut(state).fill(GOAL_REWARD);
            } else {
                for a in Action::ALL {
                    let n = grid.state_of(grid.neighbour(c, a)).expect("free");
                    next.push(index(mask, n));
                }
                rewards.row_mut(state).fill(STEP_REWARD);
            }
        }
    }
    next.extend([goal; Action::COUNT]);
    TabularMdp::from_successors(n_states, Action::COUNT, &next, rewards, &absorbing, goal)
}

/// Optimal collect-all return from every cell state with all items present.
pub fn collect_all_values(layout: &Layout, opts: &SolveOptions) -> Result<Vec<f64>> {
    let mdp = collect_all_mdp(layout)?;
    let solved = standard_value_iteration(&mdp, opts, None)?;
    let n_cells = layout.grid().n_cells();
    let full = (1usize << layout.items().len()) - 1;
    Ok((0..n_cells)
        .map(|s| solved.value.get((full - 1) * n_cells + s))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridworld::{build_mdp, rollout, Cell, Color, GridSpec, Item, Shape};

    fn corridor_with(cells: &[(usize, Color)]) -> Layout {
        let items = cells
            .iter()
            .map(|&(x, color)| Item {
                shape: Shape::Circle,
                color,
                cell: Cell::new(x, 0),
            })
            .collect();
        Layout::new(GridSpec::open(6, 1, 0).unwrap(), items).unwrap()
    }

    #[test]
    fn nearest_first_on_a_corridor() {
        // Agent at cell 0; items at distances 1, 2 and 3 in scrambled order.
        let layout = corridor_with(&[(3, Color::Blue), (1, Color::Beige), (2, Color::Purple)]);
        let mut agent = TemporalAgent::new(layout, Temperature::ZERO, SolveOptions::default()).unwrap();
        let run = agent.rollout(0, 100, 0).unwrap();
        assert_eq!(run.collected, vec![1, 2, 0]);
        assert!(run.trajectory.terminal);
        // Three moves and three pickups.
        assert!((run.trajectory.total_return - (3.0 - 0.3)).abs() < 1e-12);
    }

    #[test]
    fn single_item_matches_plain_rollout() {
        let layout = corridor_with(&[(4, Color::Blue)]);
        let mut agent = TemporalAgent::new(layout.clone(), Temperature::ZERO, SolveOptions::default()).unwrap();
        let mdp = build_mdp(&layout, &GridTask::parse("Blue").unwrap()).unwrap();
        let solved = standard_value_iteration(&mdp, &SolveOptions::default(), None).unwrap();
        for start in 0..6 {
            let temporal = agent.rollout(start, 50, 3).unwrap();
            let plain = rollout(&mdp, &solved.policy, start, 50, 3).unwrap();
            assert_eq!(temporal.trajectory.steps, plain.steps);
            assert_eq!(temporal.trajectory.total_return, plain.total_return);
        }
    }

    #[test]
    fn greedy_never_beats_the_collect_all_optimum() {
        let layout = corridor_with(&[(0, Color::Blue), (3, Color::Beige), (5, Color::Purple)]);
        let best = collect_all_values(&layout, &SolveOptions::default()).unwrap();
        let mut agent = TemporalAgent::new(layout, Temperature::ZERO, SolveOptions::default()).unwrap();
        for (start, &optimum) in best.iter().enumerate().take(6) {
            let run = agent.rollout(start, 100, 0).unwrap();
            assert!(run.collected_all(3));
            assert!(run.trajectory.total_return <= optimum + 1e-12);
        }
        // From cell 2 greedy goes to 3, then 5, then back to 0; the optimum
        // sweeps left first.
        assert!((best[2] - (3.0 - 0.7)).abs() < 1e-12);
    }

    #[test]
    fn empty_library_is_rejected() {
        let layout = Layout::new(GridSpec::open(3, 1, 0).unwrap(), vec![]).unwrap();
        assert!(TemporalAgent::new(layout.clone(), Temperature::ZERO, SolveOptions::default()).is_err());
        assert!(collect_all_mdp(&layout).is_err());
    }
}
