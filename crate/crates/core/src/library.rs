//! Task libraries: shared deterministic dynamics, one reward table per task.

use crate::error::{Error, Result};
use crate::mdp::TabularMdp;
use crate::tables::{QTable, RewardTable, StochasticPolicy, Temperature};

/// Tasks that share states, actions, dynamics and absorbing set, and whose
/// rewards differ only on the absorbing set.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskLibrary {
    base: TabularMdp,
    reference: StochasticPolicy,
    task_names: Vec<String>,
    task_rewards: Vec<RewardTable>,
    temperature: Temperature,
}

impl TaskLibrary {
    /// `base` supplies the dynamics; its own reward table is ignored.
    pub fn new(
        base: &TabularMdp,
        reference: StochasticPolicy,
        task_names: Vec<String>,
        task_rewards: Vec<RewardTable>,
        temperature: Temperature,
    ) -> Result<Self> {
        if task_rewards.is_empty() {
            return Err(Error::Empty("task library"));
        }
        if task_names.len() != task_rewards.len() {
            return Err(Error::Dimension(format!(
                "{} task names for {} reward tables",
                task_names.len(),
                task_rewards.len()
            )));
        }
        if !base.is_deterministic() {
            return Err(Error::Library("library dynamics must be deterministic".into()));
        }
        base.check_policy_shape(&reference)?;
        let base = base.with_rewards(QTable::zeros(base.n_states(), base.n_actions()))?;
        base.validate().into_result()?;
        for r in &task_rewards {
            if r.shape() != (base.n_states(), base.n_actions()) {
                return Err(Error::Dimension(format!(
                    "task reward table is {:?}, library is ({}, {})",
                    r.shape(),
                    base.n_states(),
                    base.n_actions()
                )));
            }
        }
        check_agree_off_absorbing(&task_rewards, base.absorbing_mask())?;
        let library = TaskLibrary {
            base,
            reference,
            task_names,
            task_rewards,
            temperature,
        };
        for k in 0..library.len() {
            library.task_mdp(k)?.validate().into_result()?;
        }
        Ok(library)
    }

    pub fn len(&self) -> usize {
        self.task_rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.task_rewards.is_empty()
    }

    /// Dynamics with an all-zero reward table.
    pub fn base(&self) -> &TabularMdp {
        &self.base
    }

    pub fn reference(&self) -> &StochasticPolicy {
        &self.reference
    }

    pub fn temperature(&self) -> Temperature {
        self.temperature
    }

    pub fn task_names(&self) -> &[String] {
        &self.task_names
    }

    pub fn task_rewards(&self) -> &[RewardTable] {
        &self.task_rewards
    }

    pub fn task_index(&self, name: &str) -> Option<usize> {
        self.task_names.iter().position(|n| n == name)
    }

    pub fn task_mdp(&self, k: usize) -> Result<TabularMdp> {
        let rewards = self
            .task_rewards
            .get(k)
            .ok_or_else(|| Error::Library(format!("no task with index {k}")))?;
        self.base.with_rewards(rewards.clone())
    }

    /// Entrywise maximum of the task rewards: the union task.
    pub fn max_rewards(&self) -> RewardTable {
        self.fold_rewards(f64::max)
    }

    /// Entrywise mean of the task rewards: the AND task used as oracle for averaged tables.
    pub fn mean_rewards(&self) -> RewardTable {
        let n = self.len() as f64;
        self.fold_rewards(|a, b| a + b).map(|x| x / n)
    }

    fn fold_rewards(&self, f: impl Fn(f64, f64) -> f64) -> RewardTable {
        let mut out = self.task_rewards[0].clone();
        for r in &self.task_rewards[1..] {
            out = out.zip_map(r, &f).expect("library tables share a shape");
        }
        out
    }

    /// Assembles the shared dynamics with `rewards` into a validated MDP.
    pub fn build_composite_reward_mdp(&self, rewards: &RewardTable) -> Result<TabularMdp> {
        let mdp = self.base.with_rewards(rewards.clone())?;
        mdp.validate().into_result()?;
        Ok(mdp)
    }
}

/// Reward tables must be bitwise equal at every `(s, a)` with `s` outside `absorbing`.
pub fn check_agree_off_absorbing(tables: &[RewardTable], absorbing: &[bool]) -> Result<()> {
    let Some(first) = tables.first() else {
        return Ok(());
    };
    for (k, table) in tables.iter().enumerate().skip(1) {
        first.check_same_shape(table)?;
        for (s, &is_goal) in absorbing.iter().enumerate() {
            if is_goal {
                continue;
            }
            for a in 0..first.n_actions() {
                if first.get(s, a) != table.get(s, a) {
                    return Err(Error::Library(format!(
                        "tasks 0 and {k} disagree at non-absorbing ({s}, {a}): {} vs {}",
                        first.get(s, a),
                        table.get(s, a)
                    )));
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain_library(rewards: Vec<RewardTable>) -> Result<TaskLibrary> {
        let names = (0..rewards.len()).map(|k| format!("task{k}")).collect();
        TaskLibrary::new(
            &TabularMdp::two_state_chain(),
            StochasticPolicy::uniform(2, 2),
            names,
            rewards,
            Temperature::new(1.0).unwrap(),
        )
    }

    #[test]
    fn single_task_round_trips_to_its_mdp() {
        let mdp = TabularMdp::two_state_chain();
        let lib = chain_library(vec![mdp.rewards().clone()]).unwrap();
        assert_eq!(lib.task_mdp(0).unwrap(), mdp);
        assert_eq!(lib.build_composite_reward_mdp(mdp.rewards()).unwrap(), mdp);
    }

    #[test]
    fn constant_reward_assembles_the_chain() {
        let lib = chain_library(vec![TabularMdp::two_state_chain().rewards().clone()]).unwrap();
        let rewards = QTable::from_rows(&[vec![-1.0, -1.0], vec![0.0, 0.0]]).unwrap();
        let mdp = lib.build_composite_reward_mdp(&rewards).unwrap();
        assert!(mdp.validate().is_valid());
        assert_eq!(mdp, TabularMdp::two_state_chain());
    }

    #[test]
    fn max_and_mean_rewards_fold_entrywise() {
        let a = QTable::from_rows(&[vec![-1.0, -1.0], vec![0.0, 0.0]]).unwrap();
        let lib = chain_library(vec![a.clone(), a.clone(), a.clone()]).unwrap();
        assert_eq!(lib.max_rewards(), a);
        assert_eq!(lib.mean_rewards(), a);
    }

    #[test]
    fn mismatched_reward_shape_is_rejected() {
        let lib = chain_library(vec![TabularMdp::two_state_chain().rewards().clone()]).unwrap();
        assert!(matches!(
            lib.build_composite_reward_mdp(&QTable::zeros(3, 2)),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn tasks_must_agree_off_the_absorbing_set() {
        // The chain has no absorbing decision states, so any difference at s breaks the library.
        let a = QTable::from_rows(&[vec![-1.0, -1.0], vec![0.0, 0.0]]).unwrap();
        let b = QTable::from_rows(&[vec![-1.0, -2.0], vec![0.0, 0.0]]).unwrap();
        assert!(matches!(chain_library(vec![a, b]), Err(Error::Library(_))));
    }

    #[test]
    fn stochastic_dynamics_are_rejected() {
        let rewards = QTable::zeros(2, 1);
        let mdp = TabularMdp::new(
            2,
            1,
            vec![vec![(0, 0.5), (1, 0.5)], vec![(1, 1.0)]],
            rewards.clone(),
            &[],
            1,
        )
        .unwrap();
        let lib = TaskLibrary::new(
            &mdp,
            StochasticPolicy::uniform(2, 1),
            vec!["t".into()],
            vec![rewards],
            Temperature::new(1.0).unwrap(),
        );
        assert!(matches!(lib, Err(Error::Library(_))));
    }
}
