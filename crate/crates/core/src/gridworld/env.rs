use rand::Rng;
use serde::{Deserialize, Serialize};

use super::layout::{Action, Cell, Layout};
use super::task::GridTask;
use crate::error::{Error, Result};
use crate::library::TaskLibrary;
use crate::mdp::TabularMdp;
use crate::rng::{episode_rng, sample_index};
use crate::tables::{QTable, StochasticPolicy, Temperature};

pub const STEP_REWARD: f64 = -0.1;
pub const GOAL_REWARD: f64 = 1.0;
/// Reward for entering another library task's goal in [`build_task_library`].
pub const DEFAULT_FOREIGN_GOAL_REWARD: f64 = -100.0;

/// Deterministic successor table over cells; absorbing cells jump to the goal.
fn successors(layout: &Layout, absorbing: &[Cell]) -> (Vec<usize>, Vec<usize>) {
    let grid = layout.grid();
    let goal = grid.goal_state();
    let mut next = Vec::with_capacity(grid.n_states() * Action::COUNT);
    for &c in grid.cells() {
        for a in Action::ALL {
            if absorbing.contains(&c) {
                next.push(goal);
            } else {
                next.push(grid.state_of(grid.neighbour(c, a)).expect("neighbours are free"));
            }
        }
    }
    next.extend([goal; Action::COUNT]);
    let absorbing_states = absorbing
        .iter()
        .map(|&c| grid.state_of(c).expect("items lie on free cells"))
        .collect();
    (next, absorbing_states)
}

/// Rewards: `STEP_REWARD` for moves, `cell_reward(c)` for leaving absorbing cell `c`.
fn reward_table(layout: &Layout, absorbing: &[Cell], cell_reward: impl Fn(Cell) -> f64) -> QTable {
    let grid = layout.grid();
    let mut r = QTable::zeros(grid.n_states(), Action::COUNT);
    for (s, &c) in grid.cells().iter().enumerate() {
        let value = if absorbing.contains(&c) {
            cell_reward(c)
        } else {
            STEP_REWARD
        };
        r.row_mut(s).fill(value);
    }
    r
}

/// MDP for collecting any item matched by `task`. Other items are decoration.
pub fn build_mdp(layout: &Layout, task: &GridTask) -> Result<TabularMdp> {
    let goals = task.goal_cells(layout);
    if goals.is_empty() {
        return Err(Error::EmptyTask(task.name().to_string()));
    }
    let (next, absorbing) = successors(layout, &goals);
    let rewards = reward_table(layout, &goals, |_| GOAL_REWARD);
    let grid = layout.grid();
    TabularMdp::from_successors(
        grid.n_states(),
        Action::COUNT,
        &next,
        rewards,
        &absorbing,
        grid.goal_state(),
    )
}

/// Library whose shared absorbing set is the union of every task's goal
/// cells. Task `k` earns `GOAL_REWARD` on its own goals and
/// `foreign_goal_reward` on goals belonging only to other tasks.
pub fn build_task_library(
    layout: &Layout,
    tasks: &[GridTask],
    tau: Temperature,
    foreign_goal_reward: f64,
) -> Result<TaskLibrary> {
    if tasks.is_empty() {
        return Err(Error::Empty("task list"));
    }
    let mut union: Vec<Cell> = Vec::new();
    for task in tasks {
        let goals = task.goal_cells(layout);
        if goals.is_empty() {
            return Err(Error::EmptyTask(task.name().to_string()));
        }
        for c in goals {
            if !union.contains(&c) {
                union.push(c);
            }
        }
    }
    let (next, absorbing) = successors(layout, &union);
    let grid = layout.grid();
    let base = TabularMdp::from_successors(
        grid.n_states(),
        Action::COUNT,
        &next,
        QTable::zeros(grid.n_states(), Action::COUNT),
        &absorbing,
        grid.goal_state(),
    )?;
    let rewards = tasks
        .iter()
        .map(|task| {
            let own = task.goal_cells(layout);
            reward_table(layout, &union, |c| {
                if own.contains(&c) {
                    GOAL_REWARD
                } else {
                    foreign_goal_reward
                }
            })
        })
        .collect();
    TaskLibrary::new(
        &base,
        StochasticPolicy::uniform(grid.n_states(), Action::COUNT),
        tasks.iter().map(|t| t.name().to_string()).collect(),
        rewards,
        tau,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub next: usize,
    pub reward: f64,
    /// Set on the transition out of the absorbing set.
    pub done: bool,
}

/// One transition of a deterministic MDP.
pub fn step(mdp: &TabularMdp, state: usize, action: usize) -> Result<StepOutcome> {
    if state >= mdp.n_states() {
        return Err(Error::InvalidState(state));
    }
    if action >= mdp.n_actions() {
        return Err(Error::InvalidAction(action));
    }
    let next = mdp
        .successor(state, action)
        .ok_or_else(|| Error::InvalidMdp(format!("({state}, {action}) has a stochastic transition")))?;
    Ok(StepOutcome {
        next,
        reward: mdp.reward(state, action),
        done: mdp.is_absorbing(state),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: usize,
    pub action: usize,
    pub reward: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub steps: Vec<Transition>,
    /// State after the last step (the start state when there are no steps).
    pub final_state: usize,
    /// Whether the episode ended by leaving the absorbing set.
    pub terminal: bool,
    pub total_return: f64,
}

impl Trajectory {
    pub fn empty(start: usize) -> Self {
        Trajectory {
            steps: Vec::new(),
            final_state: start,
            terminal: false,
            total_return: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn start(&self) -> usize {
        self.steps.first().map_or(self.final_state, |t| t.state)
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Visited states in order, including the final one.
    pub fn states(&self) -> Vec<usize> {
        let mut states: Vec<usize> = self.steps.iter().map(|t| t.state).collect();
        states.push(self.final_state);
        states
    }

    /// Absorbing state the episode left through, if it terminated.
    pub fn exit_state(&self) -> Option<usize> {
        self.terminal.then(|| self.steps.last().map(|t| t.state)).flatten()
    }

    fn push(&mut self, state: usize, action: usize, reward: f64, next: usize) {
        self.steps.push(Transition { state, action, reward });
        self.total_return += reward;
        self.final_state = next;
    }
}

/// Samples actions from `policy` until the episode leaves the absorbing set
/// or `max_steps` transitions have been taken.
pub fn rollout(
    mdp: &TabularMdp,
    policy: &StochasticPolicy,
    start: usize,
    max_steps: usize,
    seed: u64,
) -> Result<Trajectory> {
    rollout_with_rng(mdp, policy, start, max_steps, &mut episode_rng(seed, 0))
}

/// [`rollout`] drawing from a caller-supplied stream.
pub fn rollout_with_rng<R: Rng + ?Sized>(
    mdp: &TabularMdp,
    policy: &StochasticPolicy,
    start: usize,
    max_steps: usize,
    rng: &mut R,
) -> Result<Trajectory> {
    mdp.check_policy_shape(policy)?;
    if start >= mdp.n_states() {
        return Err(Error::InvalidState(start));
    }
    let mut traj = Trajectory::empty(start);
    let mut s = start;
    let mut probs = Vec::new();
    while traj.len() < max_steps && s != mdp.virtual_goal() {
        let a = sample_index(policy.row(s), rng);
        let row = mdp.transition(s, a);
        let next = if let [(only, _)] = row {
            *only
        } else {
            probs.clear();
            probs.extend(row.iter().map(|&(_, p)| p));
            row[sample_index(&probs, rng)].0
        };
        let done = mdp.is_absorbing(s);
        traj.push(s, a, mdp.reward(s, a), next);
        s = next;
        if done {
            traj.terminal = true;
            break;
        }
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridworld::{Color, GridSpec, Item, Shape};
    use crate::solver::{standard_value_iteration, SolveOptions};

    fn corridor() -> Layout {
        let item = Item {
            shape: Shape::Square,
            color: Color::Blue,
            cell: Cell::new(3, 0),
        };
        Layout::new(GridSpec::open(4, 1, 0).unwrap(), vec![item]).unwrap()
    }

    #[test]
    fn corridor_value_and_rollout() {
        let mdp = build_mdp(&corridor(), &GridTask::parse("Blue").unwrap()).unwrap();
        assert!(mdp.validate().is_valid());
        let solved = standard_value_iteration(&mdp, &SolveOptions::default(), None).unwrap();
        assert!((solved.value.get(1) - 0.8).abs() < 1e-12);

        let traj = rollout(&mdp, &solved.policy, 1, 100, 5).unwrap();
        assert_eq!(traj.len(), 3);
        assert!(traj.terminal);
        assert!((traj.total_return - 0.8).abs() < 1e-12);
        assert_eq!(traj.final_state, mdp.virtual_goal());
        assert_eq!(traj.exit_state(), Some(3));
    }

    #[test]
    fn zero_steps_give_an_empty_trajectory() {
        let mdp = build_mdp(&corridor(), &GridTask::parse("Blue").unwrap()).unwrap();
        let traj = rollout(&mdp, &StochasticPolicy::uniform(5, 4), 0, 0, 1).unwrap();
        assert!(traj.is_empty());
        assert_eq!(traj.total_return, 0.0);
        assert!(!traj.terminal);
    }

    #[test]
    fn rollouts_are_seeded() {
        let layout = Layout::sample_full(GridSpec::open(6, 6, 1).unwrap()).unwrap();
        let mdp = build_mdp(&layout, &GridTask::parse("Purple").unwrap()).unwrap();
        let uniform = StochasticPolicy::uniform(mdp.n_states(), 4);
        let a = rollout(&mdp, &uniform, 0, 200, 9).unwrap();
        assert_eq!(a, rollout(&mdp, &uniform, 0, 200, 9).unwrap());
        assert_ne!(a, rollout(&mdp, &uniform, 0, 200, 10).unwrap());
        let sum: f64 = a.steps.iter().map(|t| t.reward).sum();
        assert_eq!(sum, a.total_return);
    }

    #[test]
    fn step_semantics() {
        let layout = corridor();
        let mdp = build_mdp(&layout, &GridTask::parse("Square").unwrap()).unwrap();
        let west = Action::West.index();
        assert_eq!(
            step(&mdp, 0, west).unwrap(),
            StepOutcome {
                next: 0,
                reward: -0.1,
                done: false
            }
        );
        assert_eq!(
            step(&mdp, 1, Action::East.index()).unwrap(),
            StepOutcome {
                next: 2,
                reward: -0.1,
                done: false
            }
        );
        assert_eq!(
            step(&mdp, 3, west).unwrap(),
            StepOutcome {
                next: 4,
                reward: 1.0,
                done: true
            }
        );
        assert!(matches!(step(&mdp, 0, 4), Err(Error::InvalidAction(4))));
        assert!(matches!(step(&mdp, 9, 0), Err(Error::InvalidState(9))));
    }

    #[test]
    fn task_without_items_is_rejected() {
        let layout = corridor();
        assert!(matches!(
            build_mdp(&layout, &GridTask::parse("Purple").unwrap()),
            Err(Error::EmptyTask(_))
        ));
    }

    #[test]
    fn purple_has_two_goal_cells() {
        let layout = Layout::sample_full(GridSpec::open(10, 10, 0).unwrap()).unwrap();
        let mdp = build_mdp(&layout, &GridTask::parse("Purple").unwrap()).unwrap();
        assert_eq!(mdp.absorbing_states().len(), 2);
        assert!(mdp.validate().is_valid());
    }

    #[test]
    fn library_shares_the_union_of_goals() {
        let layout = Layout::sample_full(GridSpec::open(5, 5, 4).unwrap()).unwrap();
        let tasks = [GridTask::parse("Blue").unwrap(), GridTask::parse("Square").unwrap()];
        let lib = build_task_library(&layout, &tasks, Temperature::new(1.0).unwrap(), -100.0).unwrap();
        assert_eq!(lib.base().absorbing_states().len(), 4);
        let grid = layout.grid();
        for item in layout.items() {
            let s = grid.state_of(item.cell).unwrap();
            let blue = lib.task_rewards()[0].get(s, 0);
            let square = lib.task_rewards()[1].get(s, 0);
            match (item.color, item.shape) {
                (Color::Blue, Shape::Square) => assert_eq!((blue, square), (1.0, 1.0)),
                (Color::Blue, Shape::Circle) => assert_eq!((blue, square), (1.0, -100.0)),
                (_, Shape::Square) => assert_eq!((blue, square), (-100.0, 1.0)),
                _ => assert_eq!((blue, square), (-0.1, -0.1)),
            }
        }
    }
}
