use thiserror::Error;

use crate::tables::ValueTable;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid temperature {0}: must be finite and nonnegative")]
    InvalidTemperature(f64),

    #[error("operation needs tau > 0; use the standard (max) backup for tau = 0")]
    ZeroTemperature,

    #[error("KL divergence undefined: p has mass at index {index} where q has none")]
    AbsoluteContinuity { index: usize },

    #[error("policy at state {state} is not absolutely continuous w.r.t. the reference (action {action})")]
    PolicySupport { state: usize, action: usize },

    #[error("reference policy has empty support at state {0}")]
    EmptySupport(usize),

    #[error("invalid probability row at state {state}: {reason}")]
    InvalidDistribution { state: usize, reason: String },

    #[error("horizon must be at least 1")]
    ZeroHorizon,

    #[error("policy is improper: {residual:e} probability mass never reaches the absorbing set")]
    ImproperPolicy { residual: f64 },

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    Divergence {
        iterations: usize,
        residual: f64,
        last: Box<ValueTable>,
    },

    #[error("task library invariant violated: {0}")]
    Library(String),

    #[error("invalid MDP: {0}")]
    InvalidMdp(String),

    #[error("invalid weights: {0}")]
    Weights(String),

    #[error("desirability overflow at ({state}, {action}): Q/tau = {exponent}; rescale or compose in log space")]
    DesirabilityOverflow { state: usize, action: usize, exponent: f64 },

    #[error("desirability must be positive, found {value} at ({state}, {action})")]
    NonPositiveDesirability { state: usize, action: usize, value: f64 },

    #[error("invalid state index {0}")]
    InvalidState(usize),

    #[error("invalid action index {0}")]
    InvalidAction(usize),

    #[error("AND-composition needs exactly two Q-tables, got {0}")]
    AndArity(usize),

    #[error("Renyi divergence is infinite at state {0}; the bound is vacuous")]
    UnboundedDivergence(usize),

    #[error("invalid layout: {0}")]
    Layout(String),

    #[error("unknown task name `{0}`")]
    UnknownTask(String),

    #[error("task `{0}` matches no item in the layout")]
    EmptyTask(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn is_divergence(&self) -> bool {
        matches!(self, Error::Divergence { .. } | Error::ImproperPolicy { .. })
    }
}
