//! Value, Q and policy tables over a finite state/action space.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::sup_norm_diff;

/// Row sums of probability tables must match 1 this closely.
pub const PROB_TOLERANCE: f64 = 1e-12;

/// Entropy temperature `tau >= 0`. Zero selects the standard max backup.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Temperature(f64);

impl Temperature {
    pub const ZERO: Temperature = Temperature(0.0);

    pub fn new(tau: f64) -> Result<Self> {
        if tau.is_finite() && tau >= 0.0 {
            Ok(Temperature(tau))
        } else {
            Err(Error::InvalidTemperature(tau))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0.0
    }

    /// The temperature as a positive value, or [`Error::ZeroTemperature`].
    pub fn positive(self) -> Result<f64> {
        if self.0 > 0.0 {
            Ok(self.0)
        } else {
            Err(Error::ZeroTemperature)
        }
    }
}

impl TryFrom<f64> for Temperature {
    type Error = Error;

    fn try_from(tau: f64) -> Result<Self> {
        Temperature::new(tau)
    }
}

impl From<Temperature> for f64 {
    fn from(t: Temperature) -> f64 {
        t.0
    }
}

/// A real value per state (V, V*, and state-indexed bound tables).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ValueTable {
    values: Vec<f64>,
}

impl ValueTable {
    pub fn new(values: Vec<f64>) -> Self {
        ValueTable { values }
    }

    pub fn zeros(n_states: usize) -> Self {
        ValueTable {
            values: vec![0.0; n_states],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, s: usize) -> f64 {
        self.values[s]
    }

    pub fn set(&mut self, s: usize, v: f64) {
        self.values[s] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }

    pub fn sup_norm_diff(&self, other: &ValueTable) -> f64 {
        sup_norm_diff(&self.values, &other.values)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// A real value per (state, action) pair, row-major by state.
///
/// Houses Q-functions, reward tables, desirability tables and the AND bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    n_states: usize,
    n_actions: usize,
    values: Vec<f64>,
}

/// Reward tables share the Q-table layout.
pub type RewardTable = QTable;

impl QTable {
    pub fn zeros(n_states: usize, n_actions: usize) -> Self {
        Self::filled(n_states, n_actions, 0.0)
    }

    pub fn filled(n_states: usize, n_actions: usize, value: f64) -> Self {
        QTable {
            n_states,
            n_actions,
            values: vec![value; n_states * n_actions],
        }
    }

    pub fn from_vec(n_states: usize, n_actions: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n_states * n_actions {
            return Err(Error::Dimension(format!(
                "expected {} x {} = {} entries, got {}",
                n_states,
                n_actions,
                n_states * n_actions,
                values.len()
            )));
        }
        Ok(QTable {
            n_states,
            n_actions,
            values,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n_actions = rows.first().map_or(0, Vec::len);
        if let Some((s, row)) = rows.iter().enumerate().find(|(_, r)| r.len() != n_actions) {
            return Err(Error::Dimension(format!(
                "row {s} has {} entries, expected {n_actions}",
                row.len()
            )));
        }
        Ok(QTable {
            n_states: rows.len(),
            n_actions,
            values: rows.concat(),
        })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n_states, self.n_actions)
    }

    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.values[s * self.n_actions + a]
    }

    pub fn set(&mut self, s: usize, a: usize, v: f64) {
        self.values[s * self.n_actions + a] = v;
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.values[s * self.n_actions..(s + 1) * self.n_actions]
    }

    pub fn row_mut(&mut self, s: usize) -> &mut [f64] {
        &mut self.values[s * self.n_actions..(s + 1) * self.n_actions]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks(self.n_actions.max(1)).take(self.n_states)
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.rows().map(<[f64]>::to_vec).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> QTable {
        QTable {
            n_states: self.n_states,
            n_actions: self.n_actions,
            values: self.values.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn zip_map(&self, other: &QTable, f: impl Fn(f64, f64) -> f64) -> Result<QTable> {
        self.check_same_shape(other)?;
        Ok(QTable {
            n_states: self.n_states,
            n_actions: self.n_actions,
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn check_same_shape(&self, other: &QTable) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::Dimension(format!(
                "table shapes differ: {:?} vs {:?}",
                self.shape(),
                other.shape()
            )));
        }
        Ok(())
    }

    pub fn sup_norm_diff(&self, other: &QTable) -> f64 {
        sup_norm_diff(&self.values, &other.values)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// `max_a Q(s, a)` per state.
    pub fn max_values(&self) -> ValueTable {
        ValueTable::new(
            self.rows()
                .map(|r| r.iter().copied().fold(f64::NEG_INFINITY, f64::max))
                .collect(),
        )
    }
}

/// A row-stochastic action distribution per state.
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticPolicy {
    n_states: usize,
    n_actions: usize,
    probs: Vec<f64>,
}

impl StochasticPolicy {
    /// Builds a policy, checking each row is a distribution.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let table = QTable::from_rows(rows)?;
        Self::from_table(table)
    }

    pub fn from_table(table: QTable) -> Result<Self> {
        for (s, row) in table.rows().enumerate() {
            check_distribution(row).map_err(|reason| Error::InvalidDistribution { state: s, reason })?;
        }
        Ok(StochasticPolicy {
            n_states: table.n_states,
            n_actions: table.n_actions,
            probs: table.values,
        })
    }

    pub(crate) fn from_vec_unchecked(n_states: usize, n_actions: usize, probs: Vec<f64>) -> Self {
        debug_assert_eq!(probs.len(), n_states * n_actions);
        StochasticPolicy {
            n_states,
            n_actions,
            probs,
        }
    }

    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        let p = 1.0 / n_actions as f64;
        StochasticPolicy {
            n_states,
            n_actions,
            probs: vec![p; n_states * n_actions],
        }
    }

    /// Point mass on `actions[s]` at every state.
    pub fn deterministic(actions: &[usize], n_actions: usize) -> Result<Self> {
        let mut probs = vec![0.0; actions.len() * n_actions];
        for (s, &a) in actions.iter().enumerate() {
            if a >= n_actions {
                return Err(Error::InvalidAction(a));
            }
            probs[s * n_actions + a] = 1.0;
        }
        Ok(StochasticPolicy {
            n_states: actions.len(),
            n_actions,
            probs,
        })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn prob(&self, s: usize, a: usize) -> f64 {
        self.probs[s * self.n_actions + a]
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.probs[s * self.n_actions..(s + 1) * self.n_actions]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.n_states).map(|s| self.row(s).to_vec()).collect()
    }

    pub fn as_table(&self) -> QTable {
        QTable {
            n_states: self.n_states,
            n_actions: self.n_actions,
            values: self.probs.clone(),
        }
    }

    pub fn sup_norm_diff(&self, other: &StochasticPolicy) -> f64 {
        sup_norm_diff(&self.probs, &other.probs)
    }

    /// First action `a` with `self(a|s) > 0` where `reference(a|s) = 0`.
    pub fn support_violation(&self, reference: &StochasticPolicy) -> Option<(usize, usize)> {
        (0..self.n_states).find_map(|s| {
            (0..self.n_actions)
                .find(|&a| self.prob(s, a) > 0.0 && reference.prob(s, a) <= 0.0)
                .map(|a| (s, a))
        })
    }
}

pub(crate) fn check_distribution(row: &[f64]) -> std::result::Result<(), String> {
    if let Some(p) = row.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
        return Err(format!("entry {p} is not a nonnegative finite probability"));
    }
    let sum: f64 = row.iter().sum();
    if (sum - 1.0).abs() > PROB_TOLERANCE {
        return Err(format!("row sums to {sum}"));
    }
    Ok(())
}
