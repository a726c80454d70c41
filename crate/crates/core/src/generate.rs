//! Seeded random MDPs with a guaranteed proper uniform policy.

use rand::Rng;

use crate::error::{Error, Result};
use crate::mdp::TabularMdp;
use crate::rng::seeded;
use crate::tables::QTable;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomMdpSpec {
    /// States excluding the virtual goal.
    pub n_states: usize,
    pub n_actions: usize,
    /// Successors per (state, action); 1 gives deterministic dynamics.
    pub branching: usize,
    pub n_absorbing: usize,
}

/// States `0..n` with the last `n_absorbing` absorbing and the goal at `n`.
///
/// Action 0 always puts mass on `s + 1`, so every policy with full support
/// is proper. Step rewards are drawn from `[-1, -0.1]`, exit rewards from
/// `[-1, 1]`.
pub fn random_mdp(spec: RandomMdpSpec, seed: u64) -> Result<TabularMdp> {
    let RandomMdpSpec {
        n_states,
        n_actions,
        branching,
        n_absorbing,
    } = spec;
    if n_absorbing == 0 || n_absorbing > n_states || n_actions == 0 || branching == 0 {
        return Err(Error::InvalidMdp(format!("unusable random MDP spec {spec:?}")));
    }
    let mut rng = seeded(seed);
    let goal = n_states;
    let first_absorbing = n_states - n_absorbing;
    let mut transitions = Vec::with_capacity((n_states + 1) * n_actions);
    let mut rewards = QTable::zeros(n_states + 1, n_actions);
    for s in 0..n_states {
        for a in 0..n_actions {
            if s >= first_absorbing {
                transitions.push(vec![(goal, 1.0)]);
                rewards.set(s, a, rng.gen_range(-1.0..=1.0));
                continue;
            }
            let mut support: Vec<usize> = Vec::with_capacity(branching);
            if a == 0 {
                support.push(s + 1);
            }
            while support.len() < branching.min(n_states) {
                let n = rng.gen_range(0..n_states);
                if !support.contains(&n) {
                    support.push(n);
                }
            }
            let weights: Vec<f64> = support.iter().map(|_| rng.gen_range(0.1..1.0)).collect();
            let total: f64 = weights.iter().sum();
            transitions.push(support.into_iter().zip(weights.iter().map(|w| w / total)).collect());
            rewards.set(s, a, rng.gen_range(-1.0..=-0.1));
        }
    }
    for _ in 0..n_actions {
        transitions.push(vec![(goal, 1.0)]);
    }
    let absorbing: Vec<usize> = (first_absorbing..n_states).collect();
    TabularMdp::new(n_states + 1, n_actions, transitions, rewards, &absorbing, goal)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::reaches_absorbing;
    use crate::tables::StochasticPolicy;

    #[test]
    fn generated_mdps_are_valid_and_seeded() {
        for (seed, branching) in [(0, 1), (1, 3)] {
            let spec = RandomMdpSpec {
                n_states: 12,
                n_actions: 3,
                branching,
                n_absorbing: 2,
            };
            let mdp = random_mdp(spec, seed).unwrap();
            assert!(mdp.validate().is_valid());
            assert_eq!(mdp.is_deterministic(), branching == 1);
            assert_eq!(mdp, random_mdp(spec, seed).unwrap());
            assert!(reaches_absorbing(&StochasticPolicy::uniform(13, 3), &mdp).unwrap());
        }
    }
}
