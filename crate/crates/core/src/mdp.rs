//! Finite total-reward MDPs with an absorbing set and a virtual goal state.
//!
//! States in the absorbing set are decision states: every action moves to the
//! virtual goal `g` and collects the (task specific) reward `r(s, a)`. The
//! goal itself loops onto itself with zero reward.

use std::collections::VecDeque;
use std::fmt;

use crate::error::{Error, Result};
use crate::tables::{QTable, StochasticPolicy, PROB_TOLERANCE};

#[derive(Debug, Clone, PartialEq)]
pub struct TabularMdp {
    n_states: usize,
    n_actions: usize,
    /// Sparse next-state distribution per (state, action), row-major.
    transitions: Vec<Vec<(usize, f64)>>,
    rewards: QTable,
    absorbing: Vec<bool>,
    virtual_goal: usize,
    deterministic: bool,
}

impl TabularMdp {
    /// Builds an MDP after checking shapes and indices only.
    ///
    /// Semantic invariants (normalised rows, absorbing structure, finite
    /// rewards) are reported by [`TabularMdp::validate`], not enforced here.
    pub fn new(
        n_states: usize,
        n_actions: usize,
        transitions: Vec<Vec<(usize, f64)>>,
        rewards: QTable,
        absorbing: &[usize],
        virtual_goal: usize,
    ) -> Result<Self> {
        if n_states == 0 || n_actions == 0 {
            return Err(Error::Dimension("MDP needs at least one state and action".into()));
        }
        if transitions.len() != n_states * n_actions {
            return Err(Error::Dimension(format!(
                "expected {} transition rows, got {}",
                n_states * n_actions,
                transitions.len()
            )));
        }
        if rewards.shape() != (n_states, n_actions) {
            return Err(Error::Dimension(format!(
                "reward table is {:?}, MDP is ({n_states}, {n_actions})",
                rewards.shape()
            )));
        }
        if virtual_goal >= n_states {
            return Err(Error::InvalidState(virtual_goal));
        }
        let mut mask = vec![false; n_states];
        for &s in absorbing {
            if s >= n_states {
                return Err(Error::InvalidState(s));
            }
            mask[s] = true;
        }
        if let Some(&(s, _)) = transitions.iter().flatten().find(|(s, _)| *s >= n_states) {
            return Err(Error::InvalidState(s));
        }
        let deterministic = transitions.iter().all(|row| {
            let mut support = row.iter().filter(|(_, p)| *p > 0.0);
            matches!((support.next(), support.next()), (Some((_, p)), None) if *p == 1.0)
        });
        Ok(TabularMdp {
            n_states,
            n_actions,
            transitions,
            rewards,
            absorbing: mask,
            virtual_goal,
            deterministic,
        })
    }

    /// Deterministic MDP from a successor table `next[s * n_actions + a]`.
    pub fn from_successors(
        n_states: usize,
        n_actions: usize,
        next: &[usize],
        rewards: QTable,
        absorbing: &[usize],
        virtual_goal: usize,
    ) -> Result<Self> {
        let transitions = next.iter().map(|&s| vec![(s, 1.0)]).collect();
        Self::new(n_states, n_actions, transitions, rewards, absorbing, virtual_goal)
    }

    /// The two-state chain: from `s` (state 0), `Left` (action 0) loops and
    /// `Right` (action 1) reaches the goal `g` (state 1); both cost `-1`.
    pub fn two_state_chain() -> Self {
        let rewards = QTable::from_rows(&[vec![-1.0, -1.0], vec![0.0, 0.0]]).unwrap();
        Self::from_successors(2, 2, &[0, 1, 1, 1], rewards, &[], 1).unwrap()
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn virtual_goal(&self) -> usize {
        self.virtual_goal
    }

    pub fn rewards(&self) -> &QTable {
        &self.rewards
    }

    pub fn reward(&self, s: usize, a: usize) -> f64 {
        self.rewards.get(s, a)
    }

    pub fn transition(&self, s: usize, a: usize) -> &[(usize, f64)] {
        &self.transitions[s * self.n_actions + a]
    }

    pub fn is_absorbing(&self, s: usize) -> bool {
        self.absorbing[s]
    }

    pub fn absorbing_mask(&self) -> &[bool] {
        &self.absorbing
    }

    pub fn absorbing_states(&self) -> Vec<usize> {
        (0..self.n_states).filter(|&s| self.absorbing[s]).collect()
    }

    /// In the absorbing set or the virtual goal.
    pub fn is_terminal(&self, s: usize) -> bool {
        self.absorbing[s] || s == self.virtual_goal
    }

    pub fn is_deterministic(&self) -> bool {
        self.deterministic
    }

    /// The unique successor of `(s, a)` when that row is a point mass.
    pub fn successor(&self, s: usize, a: usize) -> Option<usize> {
        let mut support = self.transition(s, a).iter().filter(|(_, p)| *p > 0.0);
        match (support.next(), support.next()) {
            (Some(&(next, 1.0)), None) => Some(next),
            _ => None,
        }
    }

    /// Same dynamics, different reward table.
    pub fn with_rewards(&self, rewards: QTable) -> Result<Self> {
        if rewards.shape() != self.rewards.shape() {
            return Err(Error::Dimension(format!(
                "reward table is {:?}, MDP is {:?}",
                rewards.shape(),
                self.rewards.shape()
            )));
        }
        Ok(TabularMdp {
            rewards,
            ..self.clone()
        })
    }

    pub fn validate(&self) -> ValidationReport {
        let mut violations = Vec::new();
        for s in 0..self.n_states {
            for a in 0..self.n_actions {
                let row = self.transition(s, a);
                if row.iter().any(|(_, p)| !(p.is_finite() && *p >= 0.0)) {
                    violations.push(Violation::new(s, Some(a), ViolationKind::NegativeProbability));
                }
                let sum: f64 = row.iter().map(|(_, p)| p).sum();
                if (sum - 1.0).abs() > PROB_TOLERANCE {
                    violations.push(Violation::new(s, Some(a), ViolationKind::RowSum(sum)));
                }
                if self.is_terminal(s) {
                    let to_goal: f64 = row
                        .iter()
                        .filter(|(n, _)| *n == self.virtual_goal)
                        .map(|(_, p)| p)
                        .sum();
                    if (to_goal - 1.0).abs() > PROB_TOLERANCE {
                        violations.push(Violation::new(s, Some(a), ViolationKind::EscapesGoal));
                    }
                }
                let r = self.reward(s, a);
                if !r.is_finite() {
                    violations.push(Violation::new(s, Some(a), ViolationKind::NonFiniteReward(r)));
                } else if s == self.virtual_goal && r != 0.0 {
                    violations.push(Violation::new(s, Some(a), ViolationKind::GoalReward(r)));
                }
            }
        }
        ValidationReport { violations }
    }

    pub(crate) fn check_policy_shape(&self, pi: &StochasticPolicy) -> Result<()> {
        if pi.n_states() != self.n_states || pi.n_actions() != self.n_actions {
            return Err(Error::Dimension(format!(
                "policy is ({}, {}), MDP is ({}, {})",
                pi.n_states(),
                pi.n_actions(),
                self.n_states,
                self.n_actions
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ViolationKind {
    RowSum(f64),
    NegativeProbability,
    EscapesGoal,
    GoalReward(f64),
    NonFiniteReward(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub state: usize,
    pub action: Option<usize>,
    pub kind: ViolationKind,
}

impl Violation {
    fn new(state: usize, action: Option<usize>, kind: ViolationKind) -> Self {
        Violation { state, action, kind }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "state {}", self.state)?;
        if let Some(a) = self.action {
            write!(f, ", action {a}")?;
        }
        match &self.kind {
            ViolationKind::RowSum(sum) => write!(f, ": transition row sums to {sum}"),
            ViolationKind::NegativeProbability => {
                write!(f, ": transition row has a negative or non-finite entry")
            }
            ViolationKind::EscapesGoal => {
                write!(f, ": absorbing state does not move to the goal with probability 1")
            }
            ViolationKind::GoalReward(r) => write!(f, ": reward {r} at the virtual goal"),
            ViolationKind::NonFiniteReward(r) => write!(f, ": non-finite reward {r}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn into_result(self) -> Result<()> {
        if self.is_valid() {
            Ok(())
        } else {
            let msg: Vec<String> = self.violations.iter().map(ToString::to_string).collect();
            Err(Error::InvalidMdp(msg.join("; ")))
        }
    }
}

/// `KL(p || q) = sum_i p_i log(p_i / q_i)` with `0 log(0 / q) = 0`.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::Dimension(format!(
            "distributions have lengths {} and {}",
            p.len(),
            q.len()
        )));
    }
    let mut kl = 0.0;
    for (i, (&pi, &qi)) in p.iter().zip(q).enumerate() {
        if pi > 0.0 {
            if qi <= 0.0 {
                return Err(Error::AbsoluteContinuity { index: i });
            }
            kl += pi * (pi / qi).ln();
        }
    }
    Ok(kl.max(0.0))
}

/// Outcome of the finite-horizon properness check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Properness {
    pub proper: bool,
    /// Worst-case probability, over start states, of still being outside the
    /// absorbing set and goal after `horizon` steps.
    pub residual: f64,
}

pub const DEFAULT_PROPER_THRESHOLD: f64 = 1e-9;

pub fn default_proper_horizon(mdp: &TabularMdp) -> usize {
    10 * mdp.n_states()
}

/// Numerical properness certificate.
///
/// Propagates the probability of being outside `G ∪ {g}` backwards for
/// `horizon` steps and compares its maximum over start states with
/// `threshold`.
pub fn is_proper(policy: &StochasticPolicy, mdp: &TabularMdp, horizon: usize, threshold: f64) -> Result<Properness> {
    if horizon == 0 {
        return Err(Error::ZeroHorizon);
    }
    mdp.check_policy_shape(policy)?;
    let n = mdp.n_states();
    // outside[s] = P_s(s_t not terminal)
    let mut outside: Vec<f64> = (0..n).map(|s| if mdp.is_terminal(s) { 0.0 } else { 1.0 }).collect();
    for _ in 0..horizon {
        outside = (0..n)
            .map(|s| {
                if mdp.is_terminal(s) {
                    return 0.0;
                }
                let mut acc = 0.0;
                for (a, &pa) in policy.row(s).iter().enumerate() {
                    if pa > 0.0 {
                        acc += pa
                            * mdp
                                .transition(s, a)
                                .iter()
                                .map(|&(next, p)| p * outside[next])
                                .sum::<f64>();
                    }
                }
                acc
            })
            .collect();
    }
    let residual = outside.into_iter().fold(0.0, f64::max);
    Ok(Properness {
        proper: residual < threshold,
        residual,
    })
}

/// Exact properness test for finite MDPs: every state reaches `G ∪ {g}` with
/// positive probability under `policy`.
///
/// In a finite chain this is equivalent to the expected number of steps
/// outside the absorbing set being uniformly bounded.
pub fn reaches_absorbing(policy: &StochasticPolicy, mdp: &TabularMdp) -> Result<bool> {
    mdp.check_policy_shape(policy)?;
    let n = mdp.n_states();
    let mut predecessors: Vec<Vec<usize>> = vec![Vec::new(); n];
    for s in 0..n {
        for a in 0..mdp.n_actions() {
            if policy.prob(s, a) > 0.0 {
                for &(next, p) in mdp.transition(s, a) {
                    if p > 0.0 {
                        predecessors[next].push(s);
                    }
                }
            }
        }
    }
    let mut seen: Vec<bool> = (0..n).map(|s| mdp.is_terminal(s)).collect();
    let mut queue: VecDeque<usize> = (0..n).filter(|&s| seen[s]).collect();
    while let Some(s) = queue.pop_front() {
        for &prev in &predecessors[s] {
            if !seen[prev] {
                seen[prev] = true;
                queue.push_back(prev);
            }
        }
    }
    Ok(seen.into_iter().all(|x| x))
}

/// Fails with [`Error::ImproperPolicy`] unless `policy` reaches the absorbing set.
pub(crate) fn ensure_proper(policy: &StochasticPolicy, mdp: &TabularMdp) -> Result<()> {
    if reaches_absorbing(policy, mdp)? {
        return Ok(());
    }
    let check = is_proper(policy, mdp, default_proper_horizon(mdp), DEFAULT_PROPER_THRESHOLD)?;
    Err(Error::ImproperPolicy {
        residual: check.residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const LEFT: usize = 0;
    const RIGHT: usize = 1;

    fn always(action: usize) -> StochasticPolicy {
        StochasticPolicy::deterministic(&[action, action], 2).unwrap()
    }

    #[test]
    fn two_state_chain_is_valid() {
        let mdp = TabularMdp::two_state_chain();
        assert!(mdp.validate().is_valid());
        assert!(mdp.is_deterministic());
        assert_eq!(mdp.successor(0, RIGHT), Some(1));
        assert_eq!(mdp.successor(0, LEFT), Some(0));
    }

    #[test]
    fn short_row_is_reported_once() {
        let rewards = QTable::zeros(2, 1);
        let mdp = TabularMdp::new(2, 1, vec![vec![(1, 0.9)], vec![(1, 1.0)]], rewards, &[], 1).unwrap();
        let report = mdp.validate();
        assert_eq!(report.violations.len(), 1);
        assert_eq!(report.violations[0].state, 0);
        assert_eq!(report.violations[0].action, Some(0));
        assert!(matches!(report.violations[0].kind, ViolationKind::RowSum(_)));
    }

    #[test]
    fn goal_reward_is_reported() {
        let rewards = QTable::from_rows(&[vec![-1.0, -1.0], vec![0.0, 0.5]]).unwrap();
        let mdp = TabularMdp::two_state_chain().with_rewards(rewards).unwrap();
        let report = mdp.validate();
        assert_eq!(report.violations.len(), 1);
        assert_eq!(report.violations[0].state, 1);
        assert_eq!(report.violations[0].kind, ViolationKind::GoalReward(0.5));
    }

    #[test]
    fn absorbing_state_must_go_to_goal() {
        let rewards = QTable::zeros(2, 1);
        let mdp = TabularMdp::from_successors(2, 1, &[0, 1], rewards, &[0], 1).unwrap();
        let report = mdp.validate();
        assert_eq!(report.violations.len(), 1);
        assert_eq!(report.violations[0].kind, ViolationKind::EscapesGoal);
    }

    #[test]
    fn constructor_rejects_bad_indices() {
        let rewards = QTable::zeros(2, 1);
        assert!(TabularMdp::from_successors(2, 1, &[0, 5], rewards.clone(), &[], 1).is_err());
        assert!(TabularMdp::from_successors(2, 1, &[0, 1], rewards.clone(), &[3], 1).is_err());
        assert!(TabularMdp::from_successors(2, 1, &[0], rewards, &[], 1).is_err());
    }

    #[test]
    fn kl_examples() {
        assert_eq!(kl_divergence(&[0.5, 0.5], &[0.5, 0.5]).unwrap(), 0.0);
        let kl = kl_divergence(&[1.0, 0.0], &[0.5, 0.5]).unwrap();
        assert!((kl - 2f64.ln()).abs() < 1e-15);
        assert!(matches!(
            kl_divergence(&[0.5, 0.5], &[1.0, 0.0]),
            Err(Error::AbsoluteContinuity { index: 1 })
        ));
        assert!(kl_divergence(&[1.0], &[0.5, 0.5]).is_err());
    }

    #[test]
    fn properness_examples() {
        let mdp = TabularMdp::two_state_chain();
        let right = is_proper(&always(RIGHT), &mdp, 2, 1e-9).unwrap();
        assert!(right.proper);
        assert_eq!(right.residual, 0.0);

        for horizon in [1, 10, 100] {
            let left = is_proper(&always(LEFT), &mdp, horizon, 1e-9).unwrap();
            assert!(!left.proper);
            assert_eq!(left.residual, 1.0);
        }

        let uniform = StochasticPolicy::uniform(2, 2);
        let check = is_proper(&uniform, &mdp, 40, 1e-9).unwrap();
        assert!(check.proper);
        assert_eq!(check.residual, 0.5f64.powi(40));

        assert!(matches!(is_proper(&uniform, &mdp, 0, 1e-9), Err(Error::ZeroHorizon)));
    }

    #[test]
    fn structural_properness() {
        let mdp = TabularMdp::two_state_chain();
        assert!(reaches_absorbing(&always(RIGHT), &mdp).unwrap());
        assert!(!reaches_absorbing(&always(LEFT), &mdp).unwrap());
        assert!(reaches_absorbing(&StochasticPolicy::uniform(2, 2), &mdp).unwrap());
        assert!(matches!(
            ensure_proper(&always(LEFT), &mdp),
            Err(Error::ImproperPolicy { residual }) if residual == 1.0
        ));
    }
}
