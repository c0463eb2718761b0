//! File formats: CMDP and count tensors as JSON, run and aggregate series as CSV.
//!
//! Floats in CSV files are written with 17 significant digits, which is
//! enough for an exact `f64` round-trip.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use cmdp_psrl::agent::RunRecord;
use cmdp_psrl::posterior::TransitionCounts;
use cmdp_psrl::{Direction, StateActionTable, TabularCmdp, TransitionKernel};
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::experiment::AggregateSeries;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DirectionDoc {
    AtMost,
    AtLeast,
}

impl From<Direction> for DirectionDoc {
    fn from(d: Direction) -> Self {
        match d {
            Direction::AtMost => DirectionDoc::AtMost,
            Direction::AtLeast => DirectionDoc::AtLeast,
        }
    }
}

impl From<DirectionDoc> for Direction {
    fn from(d: DirectionDoc) -> Self {
        match d {
            DirectionDoc::AtMost => Direction::AtMost,
            DirectionDoc::AtLeast => Direction::AtLeast,
        }
    }
}

/// JSON form of a [`TabularCmdp`]; `kernel[s][a][s']`, `reward[s][a]`, `costs[k][s][a]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CmdpDocument {
    pub num_states: usize,
    pub num_actions: usize,
    pub kernel: Vec<Vec<Vec<f64>>>,
    pub reward: Vec<Vec<f64>>,
    pub costs: Vec<Vec<Vec<f64>>>,
    pub thresholds: Vec<f64>,
    pub directions: Vec<DirectionDoc>,
}

fn nest_table(table: &StateActionTable) -> Vec<Vec<f64>> {
    (0..table.num_states()).map(|s| table.row(s).to_vec()).collect()
}

fn flatten_table(rows: &[Vec<f64>], s_n: usize, a_n: usize, what: &str) -> Result<StateActionTable> {
    if rows.len() != s_n || rows.iter().any(|r| r.len() != a_n) {
        return Err(LabError::Config(format!("{what} must have shape {s_n} x {a_n}")));
    }
    Ok(StateActionTable::new(s_n, a_n, rows.concat())?)
}

impl CmdpDocument {
    pub fn from_cmdp(cmdp: &TabularCmdp) -> Self {
        let (s_n, a_n) = (cmdp.num_states(), cmdp.num_actions());
        let kernel = (0..s_n)
            .map(|s| (0..a_n).map(|a| cmdp.kernel().row(s, a).to_vec()).collect())
            .collect();
        Self {
            num_states: s_n,
            num_actions: a_n,
            kernel,
            reward: nest_table(cmdp.reward()),
            costs: cmdp.costs().iter().map(nest_table).collect(),
            thresholds: cmdp.thresholds().to_vec(),
            directions: cmdp.directions().iter().map(|&d| d.into()).collect(),
        }
    }

    pub fn to_cmdp(&self) -> Result<TabularCmdp> {
        let (s_n, a_n) = (self.num_states, self.num_actions);
        let well_shaped = self.kernel.len() == s_n
            && self.kernel.iter().all(|per_s| per_s.len() == a_n && per_s.iter().all(|row| row.len() == s_n));
        if !well_shaped {
            return Err(LabError::Config(format!("kernel must have shape {s_n} x {a_n} x {s_n}")));
        }
        let probs: Vec<f64> = self.kernel.iter().flatten().flatten().copied().collect();
        let kernel = TransitionKernel::new(s_n, a_n, probs)?;
        let reward = flatten_table(&self.reward, s_n, a_n, "reward")?;
        let costs = self
            .costs
            .iter()
            .map(|c| flatten_table(c, s_n, a_n, "cost"))
            .collect::<Result<Vec<_>>>()?;
        let directions = self.directions.iter().map(|&d| d.into()).collect();
        Ok(TabularCmdp::new(kernel, reward, costs, self.thresholds.clone(), directions)?)
    }
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(LabError::io(path))?;
    serde_json::from_str(&text).map_err(LabError::json(path))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(LabError::json(path))?;
    text.push('\n');
    fs::write(path, text).map_err(LabError::io(path))
}

pub fn read_cmdp(path: &Path) -> Result<TabularCmdp> {
    read_json::<CmdpDocument>(path)?.to_cmdp()
}

pub fn write_cmdp(path: &Path, cmdp: &TabularCmdp) -> Result<()> {
    write_json(path, &CmdpDocument::from_cmdp(cmdp))
}

/// JSON form of [`TransitionCounts`]; `counts[s][a][s']` includes the prior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountsDocument {
    pub num_states: usize,
    pub num_actions: usize,
    pub prior: f64,
    pub counts: Vec<Vec<Vec<f64>>>,
}

impl CountsDocument {
    pub fn from_counts(counts: &TransitionCounts) -> Self {
        let (s_n, a_n) = (counts.num_states(), counts.num_actions());
        Self {
            num_states: s_n,
            num_actions: a_n,
            prior: counts.prior(),
            counts: (0..s_n)
                .map(|s| (0..a_n).map(|a| counts.dirichlet_params(s, a).to_vec()).collect())
                .collect(),
        }
    }

    pub fn to_counts(&self) -> Result<TransitionCounts> {
        let n: Vec<f64> = self.counts.iter().flatten().flatten().copied().collect();
        Ok(TransitionCounts::from_parts(self.num_states, self.num_actions, self.prior, n)?)
    }
}

/// 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Timesteps kept under `stride`: those with `(T - 1 - t) % stride == 0`, so the
/// final step is always present.
pub fn recorded_steps(horizon: usize, stride: usize) -> impl Iterator<Item = usize> {
    let first = (horizon - 1) % stride;
    (first..horizon).step_by(stride)
}

pub fn run_csv_header(num_constraints: usize) -> String {
    let mut header = String::from("t,state,action,reward");
    for k in 1..=num_constraints {
        let _ = write!(header, ",c{k}");
    }
    header.push_str(",epoch,cum_regret");
    for k in 1..=num_constraints {
        let _ = write!(header, ",viol_{k}");
    }
    header
}

/// Per-run CSV text for the recorded steps of `record`.
pub fn run_csv(record: &RunRecord, stride: usize) -> String {
    let k_n = record.num_constraints();
    let mut out = run_csv_header(k_n);
    out.push('\n');
    for t in recorded_steps(record.horizon(), stride) {
        let _ = write!(
            out,
            "{t},{},{},{}",
            record.states[t],
            record.actions[t],
            fmt_f64(record.rewards[t])
        );
        for k in 0..k_n {
            let _ = write!(out, ",{}", fmt_f64(record.costs[k][t]));
        }
        let _ = write!(out, ",{},{}", record.epochs[t], fmt_f64(record.cum_regret[t]));
        for k in 0..k_n {
            let _ = write!(out, ",{}", fmt_f64(record.violations[k][t]));
        }
        out.push('\n');
    }
    out
}

pub fn aggregate_csv_header(num_constraints: usize) -> String {
    let mut header = String::from("t,mean_avg_reward,std_avg_reward");
    for k in 1..=num_constraints {
        let _ = write!(header, ",mean_avg_c{k},std_avg_c{k}");
    }
    header
}

pub fn aggregate_csv(series: &AggregateSeries) -> String {
    let k_n = series.mean_avg_costs.len();
    let mut out = aggregate_csv_header(k_n);
    out.push('\n');
    for (i, t) in series.steps.iter().enumerate() {
        let _ = write!(
            out,
            "{t},{},{}",
            fmt_f64(series.mean_avg_reward[i]),
            fmt_f64(series.std_avg_reward[i])
        );
        for k in 0..k_n {
            let _ = write!(
                out,
                ",{},{}",
                fmt_f64(series.mean_avg_costs[k][i]),
                fmt_f64(series.std_avg_costs[k][i])
            );
        }
        out.push('\n');
    }
    out
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(LabError::io(path))
}
