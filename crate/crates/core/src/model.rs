//! CMDP data model.
//!
//! Tables are stored flat and row-major: a kernel entry `P(s'|s,a)` lives at
//! `(s * A + a) * S + s'`, a state-action entry at `s * A + a`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

/// Tolerance on row sums of kernels and policies.
pub const ROW_SUM_TOL: f64 = 1e-12;
/// Occupancy entries may dip this far below zero (LP slack) before being rejected.
pub const OCCUPANCY_NEG_TOL: f64 = 1e-9;
/// Allowed deviation of the total occupancy mass from one.
pub const OCCUPANCY_MASS_TOL: f64 = 1e-8;
/// Allowed flow-balance residual of an occupancy measure.
pub const FLOW_RESIDUAL_TOL: f64 = 1e-8;
/// State marginals below this are treated as zero mass during policy extraction.
pub const ZERO_MASS_TOL: f64 = 1e-9;

/// Transition probabilities `P(s'|s,a)`, shape `S x A x S`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionKernel {
    num_states: usize,
    num_actions: usize,
    probs: Vec<f64>,
}

impl TransitionKernel {
    /// Builds a kernel from flat row-major probabilities, validating every row.
    pub fn new(num_states: usize, num_actions: usize, probs: Vec<f64>) -> Result<Self> {
        if num_states == 0 || num_actions == 0 {
            return Err(Error::InvalidModel("kernel needs at least one state and action".into()));
        }
        if probs.len() != num_states * num_actions * num_states {
            return Err(Error::InvalidModel(format!(
                "kernel has {} entries, expected {}",
                probs.len(),
                num_states * num_actions * num_states
            )));
        }
        let kernel = Self { num_states, num_actions, probs };
        for s in 0..num_states {
            for a in 0..num_actions {
                check_distribution(kernel.row(s, a)).map_err(|why| {
                    Error::InvalidModel(format!("kernel row ({s}, {a}) {why}"))
                })?;
            }
        }
        Ok(kernel)
    }

    /// Builds a kernel from a closure over `(s, a, s')`.
    pub fn from_fn(
        num_states: usize,
        num_actions: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut probs = Vec::with_capacity(num_states * num_actions * num_states);
        for s in 0..num_states {
            for a in 0..num_actions {
                for next in 0..num_states {
                    probs.push(f(s, a, next));
                }
            }
        }
        Self::new(num_states, num_actions, probs)
    }

    /// Skips validation. Callers guarantee rows are distributions.
    pub(crate) fn from_raw(num_states: usize, num_actions: usize, probs: Vec<f64>) -> Self {
        debug_assert_eq!(probs.len(), num_states * num_actions * num_states);
        Self { num_states, num_actions, probs }
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    #[inline]
    pub fn prob(&self, s: usize, a: usize, next: usize) -> f64 {
        self.probs[(s * self.num_actions + a) * self.num_states + next]
    }

    /// The distribution `P(.|s,a)`.
    #[inline]
    pub fn row(&self, s: usize, a: usize) -> &[f64] {
        let start = (s * self.num_actions + a) * self.num_states;
        &self.probs[start..start + self.num_states]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.probs
    }

    /// State-to-state matrix `M(s'|s) = sum_a pi(a|s) P(s'|s,a)`, row-major `S x S`.
    pub fn induced_chain(&self, policy: &StochasticPolicy) -> Vec<f64> {
        let n = self.num_states;
        let mut chain = vec![0.0; n * n];
        for s in 0..n {
            let out = &mut chain[s * n..(s + 1) * n];
            for a in 0..self.num_actions {
                let w = policy.prob(s, a);
                if w == 0.0 {
                    continue;
                }
                for (m, p) in out.iter_mut().zip(self.row(s, a)) {
                    *m += w * p;
                }
            }
        }
        chain
    }
}

fn check_distribution(row: &[f64]) -> core::result::Result<(), &'static str> {
    let mut sum = 0.0;
    for &p in row {
        if !p.is_finite() {
            return Err("has a non-finite entry");
        }
        if p < 0.0 {
            return Err("has a negative entry");
        }
        sum += p;
    }
    if (sum - 1.0).abs() > ROW_SUM_TOL {
        return Err("does not sum to one");
    }
    Ok(())
}

/// A real table over state-action pairs, shape `S x A`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateActionTable {
    num_states: usize,
    num_actions: usize,
    values: Vec<f64>,
}

impl StateActionTable {
    pub fn new(num_states: usize, num_actions: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != num_states * num_actions {
            return Err(Error::InvalidModel(format!(
                "table has {} entries, expected {}",
                values.len(),
                num_states * num_actions
            )));
        }
        Ok(Self { num_states, num_actions, values })
    }

    pub fn from_fn(
        num_states: usize,
        num_actions: usize,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Self {
        let mut values = Vec::with_capacity(num_states * num_actions);
        for s in 0..num_states {
            for a in 0..num_actions {
                values.push(f(s, a));
            }
        }
        Self { num_states, num_actions, values }
    }

    pub fn zeros(num_states: usize, num_actions: usize) -> Self {
        Self { num_states, num_actions, values: vec![0.0; num_states * num_actions] }
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    #[inline]
    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.values[s * self.num_actions + a]
    }

    #[inline]
    pub fn set(&mut self, s: usize, a: usize, value: f64) {
        self.values[s * self.num_actions + a] = value;
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.values[s * self.num_actions..(s + 1) * self.num_actions]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    fn negated(&self) -> Self {
        Self {
            num_states: self.num_states,
            num_actions: self.num_actions,
            values: self.values.iter().map(|v| -v).collect(),
        }
    }
}

/// Sense of a long-run average cost constraint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    /// `lambda_k <= C_k`
    AtMost,
    /// `lambda_k >= C_k`
    AtLeast,
}

impl Direction {
    /// Sign that maps a cost/threshold pair into `AtMost` form.
    pub fn sign(self) -> f64 {
        match self {
            Direction::AtMost => 1.0,
            Direction::AtLeast => -1.0,
        }
    }
}

/// Which per-step signal to average.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Signal {
    Reward,
    Cost(usize),
}

/// A tabular constrained MDP with known reward and cost functions.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularCmdp {
    kernel: TransitionKernel,
    reward: StateActionTable,
    costs: Vec<StateActionTable>,
    thresholds: Vec<f64>,
    directions: Vec<Direction>,
}

impl TabularCmdp {
    pub fn new(
        kernel: TransitionKernel,
        reward: StateActionTable,
        costs: Vec<StateActionTable>,
        thresholds: Vec<f64>,
        directions: Vec<Direction>,
    ) -> Result<Self> {
        let (s, a) = (kernel.num_states(), kernel.num_actions());
        if costs.len() != thresholds.len() || costs.len() != directions.len() {
            return Err(Error::InvalidModel(format!(
                "{} costs, {} thresholds and {} directions",
                costs.len(),
                thresholds.len(),
                directions.len()
            )));
        }
        for (name, table) in core::iter::once(("reward", &reward)).chain(costs.iter().map(|c| ("cost", c))) {
            if table.num_states() != s || table.num_actions() != a {
                return Err(Error::InvalidModel(format!("{name} table shape does not match kernel")));
            }
            if table.as_slice().iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidModel(format!("{name} table has non-finite entries")));
            }
        }
        if thresholds.iter().any(|c| c.is_nan()) {
            return Err(Error::InvalidModel("threshold is NaN".into()));
        }
        Ok(Self { kernel, reward, costs, thresholds, directions })
    }

    /// An unconstrained model.
    pub fn unconstrained(kernel: TransitionKernel, reward: StateActionTable) -> Result<Self> {
        Self::new(kernel, reward, Vec::new(), Vec::new(), Vec::new())
    }

    pub fn num_states(&self) -> usize {
        self.kernel.num_states()
    }

    pub fn num_actions(&self) -> usize {
        self.kernel.num_actions()
    }

    pub fn num_constraints(&self) -> usize {
        self.costs.len()
    }

    pub fn kernel(&self) -> &TransitionKernel {
        &self.kernel
    }

    pub fn reward(&self) -> &StateActionTable {
        &self.reward
    }

    pub fn costs(&self) -> &[StateActionTable] {
        &self.costs
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    pub fn directions(&self) -> &[Direction] {
        &self.directions
    }

    pub fn signal(&self, signal: Signal) -> Result<&StateActionTable> {
        match signal {
            Signal::Reward => Ok(&self.reward),
            Signal::Cost(k) => self.costs.get(k).ok_or(Error::IndexOutOfRange),
        }
    }

    /// Constraint `k` rewritten as `cost <= threshold`.
    pub fn normalized_constraint(&self, k: usize) -> (StateActionTable, f64) {
        match self.directions[k] {
            Direction::AtMost => (self.costs[k].clone(), self.thresholds[k]),
            Direction::AtLeast => (self.costs[k].negated(), -self.thresholds[k]),
        }
    }

    /// Same model with a different kernel (shapes must agree).
    pub fn with_kernel(&self, kernel: TransitionKernel) -> Result<Self> {
        if kernel.num_states() != self.num_states() || kernel.num_actions() != self.num_actions() {
            return Err(Error::InvalidModel("replacement kernel shape does not match".into()));
        }
        Ok(Self { kernel, ..self.clone() })
    }
}

/// A stationary randomized policy `pi(a|s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticPolicy {
    num_states: usize,
    num_actions: usize,
    probs: Vec<f64>,
}

impl StochasticPolicy {
    pub fn new(num_states: usize, num_actions: usize, probs: Vec<f64>) -> Result<Self> {
        if num_states == 0 || num_actions == 0 || probs.len() != num_states * num_actions {
            return Err(Error::InvalidModel("policy shape mismatch".into()));
        }
        for s in 0..num_states {
            check_distribution(&probs[s * num_actions..(s + 1) * num_actions])
                .map_err(|why| Error::InvalidModel(format!("policy row {s} {why}")))?;
        }
        Ok(Self { num_states, num_actions, probs })
    }

    pub fn uniform(num_states: usize, num_actions: usize) -> Self {
        let p = 1.0 / num_actions as f64;
        Self { num_states, num_actions, probs: vec![p; num_states * num_actions] }
    }

    /// Deterministic policy taking `actions[s]` in state `s`.
    pub fn deterministic(num_actions: usize, actions: &[usize]) -> Result<Self> {
        let mut probs = vec![0.0; actions.len() * num_actions];
        for (s, &a) in actions.iter().enumerate() {
            if a >= num_actions {
                return Err(Error::IndexOutOfRange);
            }
            probs[s * num_actions + a] = 1.0;
        }
        Self::new(actions.len(), num_actions, probs)
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    #[inline]
    pub fn prob(&self, s: usize, a: usize) -> f64 {
        self.probs[s * self.num_actions + a]
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.probs[s * self.num_actions..(s + 1) * self.num_actions]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.probs
    }

    /// Inverse-CDF draw of an action given a uniform variate in `[0, 1)`.
    pub fn sample_action(&self, s: usize, u: f64) -> usize {
        sample_index(self.row(s), u)
    }
}

/// Inverse-CDF lookup; the last index with positive mass absorbs rounding.
pub(crate) fn sample_index(weights: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            acc += w;
            last = i;
            if u < acc {
                return i;
            }
        }
    }
    last
}

/// A joint state-action distribution `d(s,a)` satisfying flow balance.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyMeasure {
    table: StateActionTable,
}

impl OccupancyMeasure {
    /// Validates nonnegativity, unit mass and flow balance against `kernel`.
    pub fn new(table: StateActionTable, kernel: &TransitionKernel) -> Result<Self> {
        let occ = Self::unchecked(table);
        let (s_n, a_n) = (kernel.num_states(), kernel.num_actions());
        if occ.table.num_states() != s_n || occ.table.num_actions() != a_n {
            return Err(Error::InvalidModel("occupancy shape does not match kernel".into()));
        }
        if occ.table.as_slice().iter().any(|&v| !(v >= -OCCUPANCY_NEG_TOL)) {
            return Err(Error::InvalidModel("occupancy has negative entries".into()));
        }
        if (occ.total_mass() - 1.0).abs() > OCCUPANCY_MASS_TOL {
            return Err(Error::InvalidModel("occupancy mass is not one".into()));
        }
        if occ.flow_residual(kernel) > FLOW_RESIDUAL_TOL {
            return Err(Error::InvalidModel("occupancy violates flow balance".into()));
        }
        Ok(occ)
    }

    pub(crate) fn unchecked(table: StateActionTable) -> Self {
        Self { table }
    }

    /// `d(s,a)`, with tolerated negative slack clamped to zero.
    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.table.get(s, a).max(0.0)
    }

    pub fn table(&self) -> &StateActionTable {
        &self.table
    }

    pub fn num_states(&self) -> usize {
        self.table.num_states()
    }

    pub fn num_actions(&self) -> usize {
        self.table.num_actions()
    }

    pub fn total_mass(&self) -> f64 {
        self.table.as_slice().iter().sum()
    }

    pub fn state_marginal(&self, s: usize) -> f64 {
        (0..self.num_actions()).map(|a| self.get(s, a)).sum()
    }

    /// `max_s' |sum_a d(s',a) - sum_{s,a} P(s'|s,a) d(s,a)|`.
    pub fn flow_residual(&self, kernel: &TransitionKernel) -> f64 {
        let n = self.num_states();
        let mut inflow = vec![0.0; n];
        for s in 0..n {
            for a in 0..self.num_actions() {
                let d = self.table.get(s, a);
                for (acc, p) in inflow.iter_mut().zip(kernel.row(s, a)) {
                    *acc += p * d;
                }
            }
        }
        (0..n).fold(0.0, |m, s| {
            let out: f64 = self.table.row(s).iter().sum();
            m.max((out - inflow[s]).abs())
        })
    }

    /// Expected value of a state-action table under this measure.
    pub fn expectation(&self, table: &StateActionTable) -> f64 {
        let mut total = 0.0;
        for s in 0..self.num_states() {
            for a in 0..self.num_actions() {
                total += self.get(s, a) * table.get(s, a);
            }
        }
        total
    }
}

/// Conditional action distribution `pi(a|s) = d(s,a) / sum_a d(s,a)`.
///
/// States whose marginal falls below [`ZERO_MASS_TOL`] get the uniform row so
/// the resulting chain stays ergodic.
pub fn policy_from_occupancy(occupancy: &OccupancyMeasure) -> StochasticPolicy {
    let (n, m) = (occupancy.num_states(), occupancy.num_actions());
    let mut probs = Vec::with_capacity(n * m);
    for s in 0..n {
        let marginal = occupancy.state_marginal(s);
        if marginal > ZERO_MASS_TOL {
            let start = probs.len();
            probs.extend((0..m).map(|a| occupancy.get(s, a) / marginal));
            // exact row sums
            let sum: f64 = probs[start..].iter().sum();
            probs[start..].iter_mut().for_each(|p| *p /= sum);
        } else {
            probs.extend(core::iter::repeat_n(1.0 / m as f64, m));
        }
    }
    StochasticPolicy { num_states: n, num_actions: m, probs }
}
