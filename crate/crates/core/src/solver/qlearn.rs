//! Tabular soft Q-learning against an MDP used as a simulator.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::TabularMdp;
use crate::numerics::{argmax, soft_maximum, softmax_weights};
use crate::rng::{episode_rng, sample_index};
use crate::tables::{QTable, StochasticPolicy, Temperature};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LearningRate {
    Constant {
        rate: f64,
    },
    /// `initial / n^exponent` on the n-th visit of a pair.
    Polynomial {
        initial: f64,
        exponent: f64,
    },
}

impl LearningRate {
    fn at(self, visits: u64) -> f64 {
        match self {
            LearningRate::Constant { rate } => rate,
            LearningRate::Polynomial { initial, exponent } => initial / (visits.max(1) as f64).powf(exponent),
        }
    }
}

impl Default for LearningRate {
    fn default() -> Self {
        LearningRate::Polynomial {
            initial: 1.0,
            exponent: 0.7,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QLearningConfig {
    pub tau: Temperature,
    pub rate: LearningRate,
    pub episodes: usize,
    pub max_steps: usize,
    pub seed: u64,
    /// Start states; every state except the virtual goal when `None`.
    pub starts: Option<Vec<usize>>,
    /// Exploration rate of the epsilon-greedy behaviour used at `tau = 0`.
    pub epsilon: f64,
}

impl QLearningConfig {
    pub fn new(tau: Temperature, episodes: usize, seed: u64) -> Self {
        QLearningConfig {
            tau,
            rate: LearningRate::default(),
            episodes,
            max_steps: 1000,
            seed,
            starts: None,
            epsilon: 0.1,
        }
    }
}

/// One-step TD learning with target `r + backup(Q(s', .))`, where the backup
/// is the soft maximum under `reference` for `tau > 0` and the max for
/// `tau = 0`. Behaviour is Boltzmann in the current table (epsilon-greedy at
/// `tau = 0`). The table starts at zero.
pub fn soft_q_learning(mdp: &TabularMdp, reference: &StochasticPolicy, config: &QLearningConfig) -> Result<QTable> {
    mdp.check_policy_shape(reference)?;
    let goal = mdp.virtual_goal();
    let starts: Vec<usize> = match &config.starts {
        Some(starts) => {
            if let Some(&s) = starts.iter().find(|&&s| s >= mdp.n_states()) {
                return Err(Error::InvalidState(s));
            }
            starts.clone()
        }
        None => (0..mdp.n_states()).filter(|&s| s != goal).collect(),
    };
    if starts.is_empty() {
        return Err(Error::Empty("start states"));
    }
    let tau = config.tau.value();
    let mut q = QTable::zeros(mdp.n_states(), mdp.n_actions());
    let mut visits = vec![0u64; mdp.n_states() * mdp.n_actions()];
    let mut next_probs = Vec::new();

    for episode in 0..config.episodes {
        let mut rng = episode_rng(config.seed, episode as u64);
        let mut s = starts[rng.gen_range(0..starts.len())];
        for _ in 0..config.max_steps {
            if s == goal {
                break;
            }
            let a = if tau > 0.0 {
                let probs = softmax_weights(q.row(s), reference.row(s), tau).ok_or(Error::EmptySupport(s))?;
                sample_index(&probs, &mut rng)
            } else if rng.gen::<f64>() < config.epsilon {
                rng.gen_range(0..mdp.n_actions())
            } else {
                argmax(q.row(s))
            };
            let row = mdp.transition(s, a);
            next_probs.clear();
            next_probs.extend(row.iter().map(|&(_, p)| p));
            let next = row[sample_index(&next_probs, &mut rng)].0;

            let continuation = if next == goal {
                0.0
            } else if tau > 0.0 {
                soft_maximum(q.row(next), reference.row(next), tau)
            } else {
                q.row(next).iter().copied().fold(f64::NEG_INFINITY, f64::max)
            };
            let target = mdp.reward(s, a) + continuation;
            let idx = s * mdp.n_actions() + a;
            visits[idx] += 1;
            let alpha = config.rate.at(visits[idx]);
            let old = q.get(s, a);
            q.set(s, a, old + alpha * (target - old));
            s = next;
        }
    }
    Ok(q)
}
