//! Entropy-regularised dynamic programming.

mod iteration;
mod operators;
mod qlearn;

pub(crate) use iteration::iterate_fixed_point;
pub use iteration::{
    policy_evaluation, soft_policy_iteration, soft_value_iteration, solve, standard_value_iteration, EvalMethod,
    SolveOptions, SolveResult, EXACT_EVALUATION_LIMIT,
};
pub use operators::{
    bellman_policy_op, boltzmann_policy, greedy_policy, induced_policy, q_from_v, soft_bellman_op, standard_bellman_op,
    state_values,
};
pub use qlearn::{soft_q_learning, LearningRate, QLearningConfig};
