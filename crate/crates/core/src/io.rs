//! JSON documents for MDPs, libraries and solve results; CSV table export.
//!
//! Floats are written in shortest round-trip form, so every value survives
//! a write/read cycle bit for bit.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::library::TaskLibrary;
use crate::mdp::TabularMdp;
use crate::solver::SolveResult;
use crate::tables::{QTable, StochasticPolicy, Temperature, ValueTable};

/// Sparse transitions as `[state, action, next, probability]` quadruples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MdpDocument {
    pub n_states: usize,
    pub n_actions: usize,
    pub transitions: Vec<(usize, usize, usize, f64)>,
    pub rewards: Vec<Vec<f64>>,
    pub absorbing: Vec<usize>,
    pub virtual_goal: usize,
}

impl From<&TabularMdp> for MdpDocument {
    fn from(mdp: &TabularMdp) -> Self {
        let mut transitions = Vec::new();
        for s in 0..mdp.n_states() {
            for a in 0..mdp.n_actions() {
                transitions.extend(mdp.transition(s, a).iter().map(|&(n, p)| (s, a, n, p)));
            }
        }
        MdpDocument {
            n_states: mdp.n_states(),
            n_actions: mdp.n_actions(),
            transitions,
            rewards: mdp.rewards().to_rows(),
            absorbing: mdp.absorbing_states(),
            virtual_goal: mdp.virtual_goal(),
        }
    }
}

impl TryFrom<MdpDocument> for TabularMdp {
    type Error = Error;

    fn try_from(doc: MdpDocument) -> Result<Self> {
        let mut rows = vec![Vec::new(); doc.n_states * doc.n_actions];
        for (s, a, n, p) in doc.transitions {
            if s >= doc.n_states {
                return Err(Error::InvalidState(s));
            }
            if a >= doc.n_actions {
                return Err(Error::InvalidAction(a));
            }
            rows[s * doc.n_actions + a].push((n, p));
        }
        let rewards = QTable::from_rows(&doc.rewards)?;
        TabularMdp::new(
            doc.n_states,
            doc.n_actions,
            rows,
            rewards,
            &doc.absorbing,
            doc.virtual_goal,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskDocument {
    pub name: String,
    pub rewards: Vec<Vec<f64>>,
}

/// Shared dynamics (the MDP's own rewards are ignored), reference policy,
/// temperature and per-task reward tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LibraryDocument {
    pub dynamics: MdpDocument,
    pub reference: Vec<Vec<f64>>,
    pub temperature: Temperature,
    pub tasks: Vec<TaskDocument>,
}

impl From<&TaskLibrary> for LibraryDocument {
    fn from(lib: &TaskLibrary) -> Self {
        LibraryDocument {
            dynamics: lib.base().into(),
            reference: lib.reference().to_rows(),
            temperature: lib.temperature(),
            tasks: lib
                .task_names()
                .iter()
                .zip(lib.task_rewards())
                .map(|(name, r)| TaskDocument {
                    name: name.clone(),
                    rewards: r.to_rows(),
                })
                .collect(),
        }
    }
}

impl TryFrom<LibraryDocument> for TaskLibrary {
    type Error = Error;

    fn try_from(doc: LibraryDocument) -> Result<Self> {
        let base = TabularMdp::try_from(doc.dynamics)?;
        let reference = StochasticPolicy::from_rows(&doc.reference)?;
        let (names, rewards): (Vec<String>, Vec<Vec<Vec<f64>>>) =
            doc.tasks.into_iter().map(|t| (t.name, t.rewards)).unzip();
        let rewards = rewards
            .iter()
            .map(|rows| QTable::from_rows(rows))
            .collect::<Result<Vec<_>>>()?;
        TaskLibrary::new(&base, reference, names, rewards, doc.temperature)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveDocument {
    pub value: Vec<f64>,
    pub q: Vec<Vec<f64>>,
    pub policy: Vec<Vec<f64>>,
    pub iterations: usize,
    pub residual: f64,
}

impl From<&SolveResult> for SolveDocument {
    fn from(r: &SolveResult) -> Self {
        SolveDocument {
            value: r.value.as_slice().to_vec(),
            q: r.q.to_rows(),
            policy: r.policy.to_rows(),
            iterations: r.iterations,
            residual: r.residual,
        }
    }
}

impl TryFrom<SolveDocument> for SolveResult {
    type Error = Error;

    fn try_from(doc: SolveDocument) -> Result<Self> {
        Ok(SolveResult {
            value: ValueTable::new(doc.value),
            q: QTable::from_rows(&doc.q)?,
            policy: StochasticPolicy::from_rows(&doc.policy)?,
            iterations: doc.iterations,
            residual: doc.residual,
        })
    }
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}

/// `state,action,value` rows.
pub fn write_q_csv(path: &Path, q: &QTable) -> Result<()> {
    write_pairs(path, "value", q)
}

/// `state,action,probability` rows.
pub fn write_policy_csv(path: &Path, pi: &StochasticPolicy) -> Result<()> {
    write_pairs(path, "probability", &pi.as_table())
}

fn write_pairs(path: &Path, column: &str, table: &QTable) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["state", "action", column])?;
    for s in 0..table.n_states() {
        for a in 0..table.n_actions() {
            w.write_record([s.to_string(), a.to_string(), table.get(s, a).to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// `state,value` rows.
pub fn write_v_csv(path: &Path, v: &ValueTable) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["state", "value"])?;
    for (s, x) in v.as_slice().iter().enumerate() {
        w.write_record([s.to_string(), x.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a `state,action,value` table; rows may come in any order but must
/// cover every pair exactly once.
pub fn read_q_csv(path: &Path) -> Result<QTable> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut entries = Vec::new();
    for record in reader.deserialize() {
        let (s, a, v): (usize, usize, f64) = record?;
        entries.push((s, a, v));
    }
    let n_states = entries.iter().map(|e| e.0 + 1).max().unwrap_or(0);
    let n_actions = entries.iter().map(|e| e.1 + 1).max().unwrap_or(0);
    if entries.len() != n_states * n_actions {
        return Err(Error::Dimension(format!(
            "{} rows for a {n_states} x {n_actions} table",
            entries.len()
        )));
    }
    let mut seen = vec![false; entries.len()];
    let mut q = QTable::zeros(n_states, n_actions);
    for (s, a, v) in entries {
        let i = s * n_actions + a;
        if std::mem::replace(&mut seen[i], true) {
            return Err(Error::Dimension(format!("duplicate row for ({s}, {a})")));
        }
        q.set(s, a, v);
    }
    Ok(q)
}
