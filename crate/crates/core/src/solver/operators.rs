//! One-step Bellman backups and the policies they induce.
//!
//! All operators are Jacobi style: the output is computed entirely from the
//! input table. The virtual goal always carries value zero.

use crate::error::{Error, Result};
use crate::mdp::{kl_divergence, TabularMdp};
use crate::numerics::{argmax, soft_maximum, softmax_weights};
use crate::tables::{QTable, StochasticPolicy, Temperature, ValueTable};

fn check_values(mdp: &TabularMdp, v: &ValueTable) -> Result<()> {
    if v.len() != mdp.n_states() {
        return Err(Error::Dimension(format!(
            "value table has {} states, MDP has {}",
            v.len(),
            mdp.n_states()
        )));
    }
    Ok(())
}

fn check_reference(q: &QTable, reference: &StochasticPolicy) -> Result<()> {
    if q.shape() != (reference.n_states(), reference.n_actions()) {
        return Err(Error::Dimension(format!(
            "Q-table is {:?}, reference policy is ({}, {})",
            q.shape(),
            reference.n_states(),
            reference.n_actions()
        )));
    }
    Ok(())
}

/// `Q(s, a) = r(s, a) + sum_s' rho(s' | s, a) V(s')`, with `V(g) = 0`.
pub fn q_from_v(mdp: &TabularMdp, v: &ValueTable) -> Result<QTable> {
    check_values(mdp, v)?;
    let goal = mdp.virtual_goal();
    let mut q = QTable::zeros(mdp.n_states(), mdp.n_actions());
    for s in 0..mdp.n_states() {
        for a in 0..mdp.n_actions() {
            let future: f64 = mdp
                .transition(s, a)
                .iter()
                .filter(|(next, _)| *next != goal)
                .map(|&(next, p)| p * v.get(next))
                .sum();
            q.set(s, a, mdp.reward(s, a) + future);
        }
    }
    Ok(q)
}

/// Policy backup: expected Q under `pi` minus `tau * KL(pi_s || reference_s)`.
pub fn bellman_policy_op(
    mdp: &TabularMdp,
    pi: &StochasticPolicy,
    reference: &StochasticPolicy,
    tau: Temperature,
    v: &ValueTable,
) -> Result<ValueTable> {
    mdp.check_policy_shape(pi)?;
    mdp.check_policy_shape(reference)?;
    let q = q_from_v(mdp, v)?;
    let mut out = ValueTable::zeros(mdp.n_states());
    for s in 0..mdp.n_states() {
        if s == mdp.virtual_goal() {
            continue;
        }
        out.set(s, policy_state_value(&q, pi, reference, tau, s)?);
    }
    Ok(out)
}

/// `sum_a pi(a|s) Q(s, a) - tau KL(pi_s || reference_s)` at one state.
pub(crate) fn policy_state_value(
    q: &QTable,
    pi: &StochasticPolicy,
    reference: &StochasticPolicy,
    tau: Temperature,
    s: usize,
) -> Result<f64> {
    let expected: f64 = pi
        .row(s)
        .iter()
        .zip(q.row(s))
        .filter(|(p, _)| **p > 0.0)
        .map(|(p, q)| p * q)
        .sum();
    if tau.is_zero() {
        return Ok(expected);
    }
    let kl = kl_divergence(pi.row(s), reference.row(s)).map_err(|e| match e {
        Error::AbsoluteContinuity { index } => Error::PolicySupport {
            state: s,
            action: index,
        },
        other => other,
    })?;
    Ok(expected - tau.value() * kl)
}

/// Soft backup `tau log sum_a reference(a|s) exp(Q(s, a) / tau)`.
pub fn soft_bellman_op(
    mdp: &TabularMdp,
    reference: &StochasticPolicy,
    tau: Temperature,
    v: &ValueTable,
) -> Result<ValueTable> {
    let tau = tau.positive()?;
    mdp.check_policy_shape(reference)?;
    let q = q_from_v(mdp, v)?;
    soft_values_at(&q, reference, tau)
}

/// Standard backup `max_a Q(s, a)`.
pub fn standard_bellman_op(mdp: &TabularMdp, v: &ValueTable) -> Result<ValueTable> {
    Ok(q_from_v(mdp, v)?.max_values())
}

/// State values implied by a Q-table: the soft maximum under `reference` for
/// `tau > 0`, the plain maximum over actions for `tau = 0`.
pub fn state_values(q: &QTable, reference: &StochasticPolicy, tau: Temperature) -> Result<ValueTable> {
    check_reference(q, reference)?;
    if tau.is_zero() {
        return Ok(q.max_values());
    }
    soft_values_at(q, reference, tau.value())
}

fn soft_values_at(q: &QTable, reference: &StochasticPolicy, tau: f64) -> Result<ValueTable> {
    let mut out = ValueTable::zeros(q.n_states());
    for s in 0..q.n_states() {
        let v = soft_maximum(q.row(s), reference.row(s), tau);
        if v == f64::NEG_INFINITY {
            return Err(Error::EmptySupport(s));
        }
        out.set(s, v);
    }
    Ok(out)
}

/// Boltzmann policy `pi(a|s) ∝ reference(a|s) exp(Q(s, a) / tau)`.
pub fn boltzmann_policy(q: &QTable, reference: &StochasticPolicy, tau: Temperature) -> Result<StochasticPolicy> {
    let tau = tau.positive()?;
    check_reference(q, reference)?;
    let mut probs = Vec::with_capacity(q.n_states() * q.n_actions());
    for s in 0..q.n_states() {
        let row = softmax_weights(q.row(s), reference.row(s), tau).ok_or(Error::EmptySupport(s))?;
        probs.extend(row);
    }
    Ok(StochasticPolicy::from_vec_unchecked(q.n_states(), q.n_actions(), probs))
}

/// Deterministic argmax policy; ties go to the lowest action index.
pub fn greedy_policy(q: &QTable) -> StochasticPolicy {
    let actions: Vec<usize> = q.rows().map(argmax).collect();
    StochasticPolicy::deterministic(&actions, q.n_actions()).expect("argmax is in range")
}

/// Boltzmann policy for `tau > 0`, greedy policy for `tau = 0`.
pub fn induced_policy(q: &QTable, reference: &StochasticPolicy, tau: Temperature) -> Result<StochasticPolicy> {
    if tau.is_zero() {
        Ok(greedy_policy(q))
    } else {
        boltzmann_policy(q, reference, tau)
    }
}
