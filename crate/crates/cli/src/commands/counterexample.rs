use serde::{Deserialize, Serialize};
use softcompose::{policy_evaluation, soft_value_iteration, SolveOptions, StochasticPolicy, TabularMdp, Temperature};

use super::RunOptions;
use crate::error::{CliError, CliResult};
use crate::report::Output;

const LEFT: usize = 0;
const RIGHT: usize = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleRow {
    pub tau: f64,
    /// Upper limit `tau (log 2 - 1/2) / (2 + tau)` on epsilon.
    pub bound: f64,
    pub epsilon: f64,
    pub v_pi: f64,
    pub v_pi_closed_form: f64,
    pub v_eps: f64,
    pub v_eps_closed_form: f64,
    pub v_star: f64,
    pub v_star_closed_form: f64,
    /// `v_eps - v_pi`; positive when the stochastic policy wins.
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleReport {
    pub rows: Vec<CounterexampleRow>,
}

/// Half the smaller of the stated bound and `e^(1 - 1/tau) / 2`. The second
/// term keeps the entropy gain ahead of the extra step cost at small `tau`,
/// where half the stated bound alone is too large.
pub fn epsilon_for(tau: f64) -> f64 {
    0.5 * stated_bound(tau).min(0.5 * (1.0 - 1.0 / tau).exp())
}

fn stated_bound(tau: f64) -> f64 {
    tau * (2f64.ln() - 0.5) / (2.0 + tau)
}

/// Deterministic exit against a policy that loops with probability epsilon,
/// on the two-state chain with uniform reference.
pub fn counterexample_row(tau: f64) -> CliResult<CounterexampleRow> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(CliError::validation(format!("counterexample needs tau > 0, got {tau}")));
    }
    let temperature = Temperature::new(tau)?;
    let mdp = TabularMdp::two_state_chain();
    let reference = StochasticPolicy::uniform(2, 2);
    let opts = SolveOptions::default();
    let eps = epsilon_for(tau);
    let exit = StochasticPolicy::from_rows(&[vec![0.0, 1.0], vec![0.5, 0.5]])?;
    let mut loop_row = vec![0.0; 2];
    loop_row[LEFT] = eps;
    loop_row[RIGHT] = 1.0 - eps;
    let noisy = StochasticPolicy::from_rows(&[loop_row, vec![0.5, 0.5]])?;
    let v_pi = policy_evaluation(&mdp, &exit, &reference, temperature, &opts)?.get(0);
    let v_eps = policy_evaluation(&mdp, &noisy, &reference, temperature, &opts)?.get(0);
    let v_star = soft_value_iteration(&mdp, &reference, temperature, &opts, None)?
        .value
        .get(0);
    let ln2 = 2f64.ln();
    Ok(CounterexampleRow {
        tau,
        bound: stated_bound(tau),
        epsilon: eps,
        v_pi,
        v_pi_closed_form: -1.0 - tau * ln2,
        v_eps,
        v_eps_closed_form: -(1.0 + tau * eps * (2.0 * eps).ln()) / (1.0 - eps) - tau * (2.0 * (1.0 - eps)).ln(),
        v_star,
        v_star_closed_form: -tau * (2.0 * (1.0 / tau).exp() - 1.0).ln(),
        gap: v_eps - v_pi,
    })
}

pub fn counterexample(opts: &RunOptions) -> CliResult<CounterexampleReport> {
    let config = &opts.config;
    let taus = config.temperatures.clone().unwrap_or_else(|| vec![config.temperature]);
    if taus.is_empty() {
        return Err(CliError::validation("no temperatures given"));
    }
    let rows = taus
        .iter()
        .map(|&t| counterexample_row(t))
        .collect::<CliResult<Vec<_>>>()?;
    let mut out = Output::create(&opts.out)?;
    let mut writer = csv::Writer::from_path(out.file("counterexample.csv"))?;
    for row in &rows {
        writer.serialize(row)?;
    }
    writer.flush()?;
    let report = CounterexampleReport { rows };
    out.finish("counterexample", config, &report)?;
    if let Some(row) = report.rows.iter().find(|r| r.gap <= 0.0) {
        return Err(CliError::Failed(format!(
            "stochastic policy does not beat the deterministic one at tau {} (gap {:e})",
            row.tau, row.gap
        )));
    }
    Ok(report)
}
