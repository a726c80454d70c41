//! Exact tabular solver for total-reward entropy-regularised MDPs, with
//! optimal OR-composition, max-composition and bounded AND-composition of
//! task Q-functions, plus a gridworld domain to exercise them.

pub mod compose;
pub mod error;
pub mod generate;
pub mod gridworld;
pub mod io;
pub mod library;
pub mod mdp;
pub mod numerics;
pub mod rng;
pub mod solver;
pub mod tables;

pub use compose::{
    and_bound_c, and_bound_f, and_bounds, compose_and_average, compose_max, compose_or, compose_or_reward,
    desirability, desirability_residual, renyi_half, AndBounds, WeightVector,
};
pub use error::{Error, Result};
pub use library::TaskLibrary;
pub use mdp::{is_proper, kl_divergence, reaches_absorbing, TabularMdp, ValidationReport};
pub use solver::{
    policy_evaluation, soft_policy_iteration, soft_q_learning, soft_value_iteration, solve, standard_value_iteration,
    SolveOptions, SolveResult,
};
pub use tables::{QTable, RewardTable, StochasticPolicy, Temperature, ValueTable};
