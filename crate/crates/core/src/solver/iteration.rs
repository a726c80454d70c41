//! Soft value iteration, policy evaluation and soft policy iteration.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::operators::{
    boltzmann_policy, greedy_policy, policy_state_value, q_from_v, soft_bellman_op, standard_bellman_op,
};
use crate::error::{Error, Result};
use crate::mdp::{ensure_proper, TabularMdp};
use crate::numerics::sup_norm_diff;
use crate::tables::{QTable, StochasticPolicy, Temperature, ValueTable};

/// Iterations whose residual shrinks by less than this factor over the
/// stall window are treated as divergent.
const STALL_RATIO: f64 = 0.999_999;

/// Largest state count for which policy evaluation uses a dense solve by default.
pub const EXACT_EVALUATION_LIMIT: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum EvalMethod {
    /// Dense solve up to [`EXACT_EVALUATION_LIMIT`] states, iterative beyond.
    #[default]
    Auto,
    Exact,
    Iterative,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    /// Sup-norm change between successive iterates that counts as converged.
    pub tol: f64,
    pub max_iter: usize,
    /// When set, a residual that fails to shrink over this many iterations
    /// counts as divergence. Off by default: a long walk-in towards a large
    /// penalty also shows a flat residual.
    pub stall_window: Option<usize>,
    /// Check that evaluated or initial policies reach the absorbing set.
    pub check_proper: bool,
    pub eval_method: EvalMethod,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol: 1e-10,
            max_iter: 100_000,
            stall_window: None,
            check_proper: true,
            eval_method: EvalMethod::Auto,
        }
    }
}

impl SolveOptions {
    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub fn with_eval_method(mut self, method: EvalMethod) -> Self {
        self.eval_method = method;
        self
    }

    pub fn with_stall_window(mut self, window: usize) -> Self {
        self.stall_window = Some(window.max(1));
        self
    }

    pub fn unchecked(mut self) -> Self {
        self.check_proper = false;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub value: ValueTable,
    pub q: QTable,
    pub policy: StochasticPolicy,
    pub iterations: usize,
    /// Sup-norm of the last update.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct FixedPoint {
    pub values: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

/// Iterates `x <- step(x)` until the sup-norm change drops below `opts.tol`.
///
/// Fails with [`Error::Divergence`] when `max_iter` is exhausted, the
/// residual becomes non-finite, or it stalls over `opts.stall_window`.
pub(crate) fn iterate_fixed_point(
    init: Vec<f64>,
    opts: &SolveOptions,
    mut step: impl FnMut(&[f64]) -> Result<Vec<f64>>,
) -> Result<FixedPoint> {
    let window = opts.stall_window.unwrap_or(usize::MAX);
    let mut history = std::collections::VecDeque::new();
    let mut current = init;
    let mut residual = f64::INFINITY;
    for iteration in 1..=opts.max_iter {
        let next = step(&current)?;
        residual = sup_norm_diff(&next, &current);
        current = next;
        if !residual.is_finite() {
            break;
        }
        if residual < opts.tol {
            return Ok(FixedPoint {
                values: current,
                iterations: iteration,
                residual,
            });
        }
        if opts.stall_window.is_none() {
            continue;
        }
        history.push_back(residual);
        if history.len() > window {
            let old = history.pop_front().expect("window is nonempty");
            if residual >= STALL_RATIO * old {
                return Err(divergence(iteration, residual, current));
            }
        }
    }
    Err(divergence(opts.max_iter, residual, current))
}

fn divergence(iterations: usize, residual: f64, last: Vec<f64>) -> Error {
    Error::Divergence {
        iterations,
        residual,
        last: Box::new(ValueTable::new(last)),
    }
}

fn initial_values(mdp: &TabularMdp, v0: Option<&ValueTable>) -> Result<Vec<f64>> {
    match v0 {
        Some(v) if v.len() != mdp.n_states() => Err(Error::Dimension(format!(
            "initial value table has {} states, MDP has {}",
            v.len(),
            mdp.n_states()
        ))),
        Some(v) => Ok(v.as_slice().to_vec()),
        None => Ok(vec![0.0; mdp.n_states()]),
    }
}

/// Repeats the soft backup from `v0` (zero by default) to convergence.
pub fn soft_value_iteration(
    mdp: &TabularMdp,
    reference: &StochasticPolicy,
    tau: Temperature,
    opts: &SolveOptions,
    v0: Option<&ValueTable>,
) -> Result<SolveResult> {
    tau.positive()?;
    mdp.check_policy_shape(reference)?;
    let fixed = iterate_fixed_point(initial_values(mdp, v0)?, opts, |v| {
        Ok(soft_bellman_op(mdp, reference, tau, &ValueTable::new(v.to_vec()))?.into_vec())
    })?;
    let value = ValueTable::new(fixed.values);
    let q = q_from_v(mdp, &value)?;
    let policy = boltzmann_policy(&q, reference, tau)?;
    Ok(SolveResult {
        value,
        q,
        policy,
        iterations: fixed.iterations,
        residual: fixed.residual,
    })
}

/// Standard (tau = 0) value iteration with the max backup. The reported
/// policy is greedy with lowest-index tie breaking.
pub fn standard_value_iteration(mdp: &TabularMdp, opts: &SolveOptions, v0: Option<&ValueTable>) -> Result<SolveResult> {
    let fixed = iterate_fixed_point(initial_values(mdp, v0)?, opts, |v| {
        Ok(standard_bellman_op(mdp, &ValueTable::new(v.to_vec()))?.into_vec())
    })?;
    let value = ValueTable::new(fixed.values);
    let q = q_from_v(mdp, &value)?;
    let policy = greedy_policy(&q);
    Ok(SolveResult {
        value,
        q,
        policy,
        iterations: fixed.iterations,
        residual: fixed.residual,
    })
}

/// Soft value iteration for `tau > 0`, standard value iteration for `tau = 0`.
pub fn solve(
    mdp: &TabularMdp,
    reference: &StochasticPolicy,
    tau: Temperature,
    opts: &SolveOptions,
) -> Result<SolveResult> {
    if tau.is_zero() {
        standard_value_iteration(mdp, opts, None)
    } else {
        soft_value_iteration(mdp, reference, tau, opts, None)
    }
}

/// Value of `pi` under the entropy-regularised total reward.
///
/// The policy backup is affine in V, so the default method solves
/// `(I - P_pi) V = r_pi - tau KL` directly.
pub fn policy_evaluation(
    mdp: &TabularMdp,
    pi: &StochasticPolicy,
    reference: &StochasticPolicy,
    tau: Temperature,
    opts: &SolveOptions,
) -> Result<ValueTable> {
    mdp.check_policy_shape(pi)?;
    mdp.check_policy_shape(reference)?;
    if opts.check_proper {
        ensure_proper(pi, mdp)?;
    }
    let exact = match opts.eval_method {
        EvalMethod::Exact => true,
        EvalMethod::Iterative => false,
        EvalMethod::Auto => mdp.n_states() <= EXACT_EVALUATION_LIMIT,
    };
    if exact {
        evaluate_exact(mdp, pi, reference, tau)
    } else {
        evaluate_iterative(mdp, pi, reference, tau, opts)
    }
}

/// Immediate regularised reward `sum_a pi r - tau KL` per state.
fn policy_rewards(
    mdp: &TabularMdp,
    pi: &StochasticPolicy,
    reference: &StochasticPolicy,
    tau: Temperature,
) -> Result<Vec<f64>> {
    (0..mdp.n_states())
        .map(|s| {
            if s == mdp.virtual_goal() {
                Ok(0.0)
            } else {
                policy_state_value(mdp.rewards(), pi, reference, tau, s)
            }
        })
        .collect()
}

fn evaluate_exact(
    mdp: &TabularMdp,
    pi: &StochasticPolicy,
    reference: &StochasticPolicy,
    tau: Temperature,
) -> Result<ValueTable> {
    let goal = mdp.virtual_goal();
    let states: Vec<usize> = (0..mdp.n_states()).filter(|&s| s != goal).collect();
    let mut index = vec![usize::MAX; mdp.n_states()];
    for (i, &s) in states.iter().enumerate() {
        index[s] = i;
    }
    let rewards = policy_rewards(mdp, pi, reference, tau)?;
    let n = states.len();
    let mut a = DMatrix::<f64>::identity(n, n);
    let b = DVector::from_iterator(n, states.iter().map(|&s| rewards[s]));
    for (i, &s) in states.iter().enumerate() {
        for (act, &p_act) in pi.row(s).iter().enumerate() {
            if p_act <= 0.0 {
                continue;
            }
            for &(next, p) in mdp.transition(s, act) {
                if next != goal {
                    a[(i, index[next])] -= p_act * p;
                }
            }
        }
    }
    let solution = a.lu().solve(&b).ok_or(Error::ImproperPolicy { residual: f64::NAN })?;
    if solution.iter().any(|v| !v.is_finite()) {
        return Err(Error::ImproperPolicy { residual: f64::NAN });
    }
    let mut values = vec![0.0; mdp.n_states()];
    for (i, &s) in states.iter().enumerate() {
        values[s] = solution[i];
    }
    Ok(ValueTable::new(values))
}

fn evaluate_iterative(
    mdp: &TabularMdp,
    pi: &StochasticPolicy,
    reference: &StochasticPolicy,
    tau: Temperature,
    opts: &SolveOptions,
) -> Result<ValueTable> {
    let rewards = policy_rewards(mdp, pi, reference, tau)?;
    let goal = mdp.virtual_goal();
    let fixed = iterate_fixed_point(vec![0.0; mdp.n_states()], opts, |v| {
        Ok((0..mdp.n_states())
            .map(|s| {
                if s == goal {
                    return 0.0;
                }
                let future: f64 = pi
                    .row(s)
                    .iter()
                    .enumerate()
                    .filter(|(_, p)| **p > 0.0)
                    .map(|(a, p_act)| {
                        p_act
                            * mdp
                                .transition(s, a)
                                .iter()
                                .filter(|(next, _)| *next != goal)
                                .map(|&(next, p)| p * v[next])
                                .sum::<f64>()
                    })
                    .sum();
                rewards[s] + future
            })
            .collect())
    })?;
    Ok(ValueTable::new(fixed.values))
}

/// Alternates exact policy evaluation with the Boltzmann improvement step.
///
/// Stops once the evaluated values are a fixed point of the soft backup to
/// within `opts.tol`; `iterations` counts evaluation rounds.
pub fn soft_policy_iteration(
    mdp: &TabularMdp,
    reference: &StochasticPolicy,
    tau: Temperature,
    pi0: &StochasticPolicy,
    opts: &SolveOptions,
) -> Result<SolveResult> {
    tau.positive()?;
    mdp.check_policy_shape(reference)?;
    ensure_proper(pi0, mdp)?;
    let mut policy = pi0.clone();
    let mut residual = f64::INFINITY;
    let mut value = ValueTable::zeros(mdp.n_states());
    for round in 1..=opts.max_iter {
        value = policy_evaluation(mdp, &policy, reference, tau, opts)?;
        let backed_up = soft_bellman_op(mdp, reference, tau, &value)?;
        residual = backed_up.sup_norm_diff(&value);
        let q = q_from_v(mdp, &value)?;
        policy = boltzmann_policy(&q, reference, tau)?;
        if residual < opts.tol {
            return Ok(SolveResult {
                value,
                q,
                policy,
                iterations: round,
                residual,
            });
        }
    }
    Err(divergence(opts.max_iter, residual, value.into_vec()))
}
