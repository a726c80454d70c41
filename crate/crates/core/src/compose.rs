//! Value-function composition.
//!
//! * OR: `Q = tau log sum_k w_k exp(Q_k / tau)` is exactly optimal for the
//!   task whose absorbing rewards are combined the same way, provided the
//!   library shares deterministic dynamics and differs only on the absorbing
//!   set. Computed in log space; raw desirabilities are only formed on request.
//! * max: the `tau -> 0` limit of OR, optimal for the union task in standard RL.
//! * AND: the average of two Q-tables, with fixed-point error bounds.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::library::{check_agree_off_absorbing, TaskLibrary};
use crate::mdp::TabularMdp;
use crate::numerics::soft_maximum;
use crate::solver::{boltzmann_policy, iterate_fixed_point, SolveOptions};
use crate::tables::{QTable, RewardTable, StochasticPolicy, Temperature};

/// Weights on library tasks: nonnegative, summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub const SUM_TOLERANCE: f64 = 1e-12;

    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Weights("no weights given".into()));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(Error::Weights(format!("weight {w} is negative or not finite")));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > Self::SUM_TOLERANCE {
            return Err(Error::Weights(format!("weights sum to {sum}, not 1")));
        }
        Ok(WeightVector(weights))
    }

    /// Scales nonnegative `raw` weights to sum to one.
    pub fn normalized(raw: Vec<f64>) -> Result<Self> {
        let sum: f64 = raw.iter().sum();
        if !(sum > 0.0 && sum.is_finite()) {
            return Err(Error::Weights(format!("weights sum to {sum}")));
        }
        Self::new(raw.into_iter().map(|w| w / sum).collect())
    }

    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Weights("no weights given".into()));
        }
        Ok(WeightVector(vec![1.0 / n as f64; n]))
    }

    pub fn one_hot(n: usize, j: usize) -> Result<Self> {
        if j >= n {
            return Err(Error::Weights(format!("index {j} out of range for {n} tasks")));
        }
        let mut w = vec![0.0; n];
        w[j] = 1.0;
        Ok(WeightVector(w))
    }

    /// `(w, 1 - w)` for a two-task library.
    pub fn pair(w: f64) -> Result<Self> {
        Self::new(vec![w, 1.0 - w])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Smallest strictly positive weight.
    pub fn min_positive(&self) -> f64 {
        self.0
            .iter()
            .copied()
            .filter(|w| *w > 0.0)
            .fold(f64::INFINITY, f64::min)
    }
}

impl TryFrom<Vec<f64>> for WeightVector {
    type Error = Error;

    fn try_from(w: Vec<f64>) -> Result<Self> {
        WeightVector::new(w)
    }
}

impl From<WeightVector> for Vec<f64> {
    fn from(w: WeightVector) -> Vec<f64> {
        w.0
    }
}

/// Above this `Q / tau` the exponential overflows an f64.
const MAX_EXPONENT: f64 = 700.0;

/// Elementwise `Z = exp(Q / tau)`.
pub fn desirability(q: &QTable, tau: Temperature) -> Result<QTable> {
    let tau = tau.positive()?;
    for s in 0..q.n_states() {
        for a in 0..q.n_actions() {
            let exponent = q.get(s, a) / tau;
            if exponent > MAX_EXPONENT {
                return Err(Error::DesirabilityOverflow {
                    state: s,
                    action: a,
                    exponent,
                });
            }
        }
    }
    Ok(q.map(|x| (x / tau).exp()))
}

fn check_tables<'a>(tables: &'a [QTable], what: &'static str) -> Result<&'a QTable> {
    let first = tables.first().ok_or(Error::Empty(what))?;
    for t in &tables[1..] {
        first.check_same_shape(t)?;
    }
    Ok(first)
}

fn check_weight_count(tables: &[QTable], w: &WeightVector) -> Result<()> {
    if tables.len() != w.len() {
        return Err(Error::Weights(format!(
            "{} weights for {} tables",
            w.len(),
            tables.len()
        )));
    }
    Ok(())
}

/// Weighted log-sum-exp per entry, max-shifted.
fn weighted_soft_max(tables: &[QTable], w: &WeightVector, tau: f64) -> QTable {
    let (n_states, n_actions) = tables[0].shape();
    let mut out = QTable::zeros(n_states, n_actions);
    let mut column = vec![0.0; tables.len()];
    for s in 0..n_states {
        for a in 0..n_actions {
            for (c, t) in column.iter_mut().zip(tables) {
                *c = t.get(s, a);
            }
            out.set(s, a, soft_maximum(&column, w.as_slice(), tau));
        }
    }
    out
}

/// OR-composition `tau log sum_k w_k exp(Q_k / tau)`.
pub fn compose_or(q_list: &[QTable], w: &WeightVector, tau: Temperature) -> Result<QTable> {
    let tau = tau.positive()?;
    check_tables(q_list, "Q-table list")?;
    check_weight_count(q_list, w)?;
    Ok(weighted_soft_max(q_list, w, tau))
}

/// Reward table of the task solved by [`compose_or`]: weighted log-sum-exp
/// on the absorbing set, the shared rewards elsewhere.
pub fn compose_or_reward(
    r_list: &[RewardTable],
    absorbing: &[bool],
    w: &WeightVector,
    tau: Temperature,
) -> Result<RewardTable> {
    let tau = tau.positive()?;
    let first = check_tables(r_list, "reward table list")?;
    check_weight_count(r_list, w)?;
    if absorbing.len() != first.n_states() {
        return Err(Error::Dimension(format!(
            "absorbing mask has {} states, rewards have {}",
            absorbing.len(),
            first.n_states()
        )));
    }
    check_agree_off_absorbing(r_list, absorbing)?;
    let composed = weighted_soft_max(r_list, w, tau);
    let mut out = first.clone();
    for (s, _) in absorbing.iter().enumerate().filter(|(_, &g)| g) {
        out.row_mut(s).copy_from_slice(composed.row(s));
    }
    Ok(out)
}

impl TaskLibrary {
    /// [`compose_or_reward`] over this library's tasks at its temperature.
    pub fn composite_or_rewards(&self, w: &WeightVector) -> Result<RewardTable> {
        compose_or_reward(self.task_rewards(), self.base().absorbing_mask(), w, self.temperature())
    }
}

/// Entrywise maximum.
pub fn compose_max(q_list: &[QTable]) -> Result<QTable> {
    let first = check_tables(q_list, "Q-table list")?;
    let mut out = first.clone();
    for t in &q_list[1..] {
        out = out.zip_map(t, f64::max)?;
    }
    Ok(out)
}

/// Entrywise mean of exactly two tables.
pub fn compose_and_average(q_list: &[QTable]) -> Result<QTable> {
    match q_list {
        [a, b] => a.zip_map(b, |x, y| 0.5 * (x + y)),
        _ => Err(Error::AndArity(q_list.len())),
    }
}

/// Renyi divergence of order 1/2, `-2 log sum_i sqrt(p_i q_i)`.
///
/// Disjoint supports give `f64::INFINITY`.
pub fn renyi_half(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::Dimension(format!(
            "distributions have lengths {} and {}",
            p.len(),
            q.len()
        )));
    }
    let overlap: f64 = p.iter().zip(q).map(|(a, b)| (a * b).sqrt()).sum();
    if overlap <= 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok((-2.0 * overlap.ln()).max(0.0))
}

/// Per-state `D_1/2(pi1_s || pi2_s)`, pinned to zero on `G ∪ {g}`.
pub fn policy_divergence(mdp: &TabularMdp, pi1: &StochasticPolicy, pi2: &StochasticPolicy) -> Result<Vec<f64>> {
    (0..mdp.n_states())
        .map(|s| {
            if mdp.is_terminal(s) {
                Ok(0.0)
            } else {
                renyi_half(pi1.row(s), pi2.row(s))
            }
        })
        .collect()
}

/// Fixed point of `C(s, a) = tau E_s'[D_1/2(pi1_s' || pi2_s') + max_a' C(s', a')]`,
/// iterated from zero with `C` pinned to zero on `G ∪ {g}`.
pub fn and_bound_c(
    mdp: &TabularMdp,
    pi1: &StochasticPolicy,
    pi2: &StochasticPolicy,
    tau: Temperature,
    opts: &SolveOptions,
) -> Result<QTable> {
    let tau = tau.positive()?;
    mdp.check_policy_shape(pi1)?;
    mdp.check_policy_shape(pi2)?;
    let divergence = policy_divergence(mdp, pi1, pi2)?;
    if let Some(s) = divergence.iter().position(|d| d.is_infinite()) {
        return Err(Error::UnboundedDivergence(s));
    }
    let n_actions = mdp.n_actions();
    let fixed = iterate_fixed_point(vec![0.0; mdp.n_states() * n_actions], opts, |c| {
        let row_max: Vec<f64> = c
            .chunks(n_actions)
            .map(|r| r.iter().copied().fold(f64::NEG_INFINITY, f64::max))
            .collect();
        Ok(bound_backup(mdp, tau, |next| divergence[next] + row_max[next]))
    })?;
    QTable::from_vec(mdp.n_states(), n_actions, fixed.values)
}

/// Fixed point of `F(s, a) = tau E_s'[E_{a' ~ pi_ave}[C(s', a') - F(s', a')]]`,
/// iterated from zero with `F` pinned to zero on `G ∪ {g}`.
pub fn and_bound_f(
    mdp: &TabularMdp,
    c_star: &QTable,
    pi_ave: &StochasticPolicy,
    tau: Temperature,
    opts: &SolveOptions,
) -> Result<QTable> {
    let tau = tau.positive()?;
    mdp.check_policy_shape(pi_ave)?;
    if c_star.shape() != (mdp.n_states(), mdp.n_actions()) {
        return Err(Error::Dimension(format!(
            "C table is {:?}, MDP is ({}, {})",
            c_star.shape(),
            mdp.n_states(),
            mdp.n_actions()
        )));
    }
    let n_actions = mdp.n_actions();
    let fixed = iterate_fixed_point(vec![0.0; mdp.n_states() * n_actions], opts, |f| {
        let expected: Vec<f64> = (0..mdp.n_states())
            .map(|s| {
                pi_ave
                    .row(s)
                    .iter()
                    .enumerate()
                    .map(|(a, p)| p * (c_star.get(s, a) - f[s * n_actions + a]))
                    .sum()
            })
            .collect();
        Ok(bound_backup(mdp, tau, |next| expected[next]))
    })?;
    QTable::from_vec(mdp.n_states(), n_actions, fixed.values)
}

/// `tau * sum_s' rho(s' | s, a) g(s')` over non-terminal successors; zero rows on `G ∪ {g}`.
fn bound_backup(mdp: &TabularMdp, tau: f64, g: impl Fn(usize) -> f64) -> Vec<f64> {
    let mut out = vec![0.0; mdp.n_states() * mdp.n_actions()];
    for s in 0..mdp.n_states() {
        if mdp.is_terminal(s) {
            continue;
        }
        for a in 0..mdp.n_actions() {
            out[s * mdp.n_actions() + a] = tau
                * mdp
                    .transition(s, a)
                    .iter()
                    .filter(|(next, _)| !mdp.is_terminal(*next))
                    .map(|&(next, p)| p * g(next))
                    .sum::<f64>();
        }
    }
    out
}

/// Everything needed to judge an AND-composition of two optimal Q-tables.
#[derive(Debug, Clone, PartialEq)]
pub struct AndBounds {
    pub q_ave: QTable,
    pub pi_ave: StochasticPolicy,
    /// Per-state `D_1/2` of the two Boltzmann policies (infinite when disjoint).
    pub divergence: Vec<f64>,
    /// `None` when the recursion diverged or a divergence was infinite.
    pub c_star: Option<QTable>,
    pub f_star: Option<QTable>,
    /// Set when some policy pair has disjoint support.
    pub unbounded: bool,
}

/// Averages `q1`, `q2` and computes both bound tables on `mdp`'s dynamics.
pub fn and_bounds(
    mdp: &TabularMdp,
    q1: &QTable,
    q2: &QTable,
    reference: &StochasticPolicy,
    tau: Temperature,
    opts: &SolveOptions,
) -> Result<AndBounds> {
    let pi1 = boltzmann_policy(q1, reference, tau)?;
    let pi2 = boltzmann_policy(q2, reference, tau)?;
    let q_ave = compose_and_average(&[q1.clone(), q2.clone()])?;
    let pi_ave = boltzmann_policy(&q_ave, reference, tau)?;
    let divergence = policy_divergence(mdp, &pi1, &pi2)?;
    let (c_star, unbounded) = match and_bound_c(mdp, &pi1, &pi2, tau, opts) {
        Ok(c) => (Some(c), false),
        Err(Error::UnboundedDivergence(_)) => (None, true),
        Err(Error::Divergence { .. }) => (None, false),
        Err(e) => return Err(e),
    };
    let f_star = match &c_star {
        Some(c) => match and_bound_f(mdp, c, &pi_ave, tau, opts) {
            Ok(f) => Some(f),
            Err(Error::Divergence { .. }) => None,
            Err(e) => return Err(e),
        },
        None => None,
    };
    Ok(AndBounds {
        q_ave,
        pi_ave,
        divergence,
        c_star,
        f_star,
        unbounded,
    })
}

/// `sup |UZ - Z|` with `[UZ](s, a) = exp(r(s, a) / tau) sum_a' ref(a' | f(s, a)) Z(f(s, a), a')`
/// and `Z(g, .) = 1`. Rows of the virtual goal are skipped.
pub fn desirability_residual(library: &TaskLibrary, composite_rewards: &RewardTable, z: &QTable) -> Result<f64> {
    let mdp = library.base();
    let tau = library.temperature().positive()?;
    let reference = library.reference();
    if composite_rewards.shape() != (mdp.n_states(), mdp.n_actions()) {
        return Err(Error::Dimension("composite reward table shape".into()));
    }
    if z.shape() != composite_rewards.shape() {
        return Err(Error::Dimension("desirability table shape".into()));
    }
    for s in 0..z.n_states() {
        for a in 0..z.n_actions() {
            let value = z.get(s, a);
            if value.is_nan() || value <= 0.0 {
                return Err(Error::NonPositiveDesirability {
                    state: s,
                    action: a,
                    value,
                });
            }
        }
    }
    let goal = mdp.virtual_goal();
    let mut residual: f64 = 0.0;
    for s in (0..mdp.n_states()).filter(|&s| s != goal) {
        for a in 0..mdp.n_actions() {
            let next = mdp
                .successor(s, a)
                .ok_or_else(|| Error::Library("library dynamics must be deterministic".into()))?;
            let continuation: f64 = if next == goal {
                1.0
            } else {
                reference.row(next).iter().zip(z.row(next)).map(|(p, zv)| p * zv).sum()
            };
            let backed_up = (composite_rewards.get(s, a) / tau).exp() * continuation;
            residual = residual.max((backed_up - z.get(s, a)).abs());
        }
    }
    Ok(residual)
}
