//! The CMDP-PSRL learning loop and its regret accounting.
//!
//! The agent starts from the uniform policy. After every transition it bumps
//! the Dirichlet counts and the in-epoch visit ledger; once some pair has been
//! visited at least `max(1, N_e(s,a) / M)` times in the current epoch it draws
//! a kernel from the posterior, solves the occupancy LP on that kernel and
//! installs the extracted policy for the next epoch.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::lp::solve_constrained_occupancy;
use crate::model::{sample_index, Direction, StochasticPolicy, TabularCmdp, TransitionKernel};
use crate::posterior::{sample_kernel, TransitionCounts};
use crate::rng::RunStreams;
use crate::{Error, Result};

/// Extra posterior draws allowed by [`InfeasibleFallback::Resample`].
pub const MAX_RESAMPLES: usize = 10;

/// What to do when the LP on a sampled kernel is infeasible.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InfeasibleFallback {
    /// Keep the incumbent policy for the new epoch.
    #[default]
    KeepPreviousPolicy,
    /// Redraw up to [`MAX_RESAMPLES`] kernels, then keep the incumbent.
    Resample,
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialState {
    Fixed(usize),
    Distribution(Vec<f64>),
}

impl Default for InitialState {
    fn default() -> Self {
        InitialState::Fixed(0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub horizon: usize,
    pub seed: u64,
    pub m_factor: u64,
    pub infeasible_fallback: InfeasibleFallback,
    pub initial_state: InitialState,
}

impl RunConfig {
    pub fn new(horizon: usize, seed: u64) -> Self {
        Self {
            horizon,
            seed,
            m_factor: 1,
            infeasible_fallback: InfeasibleFallback::default(),
            initial_state: InitialState::default(),
        }
    }

    pub fn with_m_factor(mut self, m_factor: u64) -> Self {
        self.m_factor = m_factor;
        self
    }

    pub fn validate(&self, num_states: usize) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::InvalidModel("horizon must be at least 1".into()));
        }
        if self.m_factor == 0 {
            return Err(Error::InvalidModel("trigger factor M must be at least 1".into()));
        }
        match &self.initial_state {
            InitialState::Fixed(s) if *s >= num_states => Err(Error::IndexOutOfRange),
            InitialState::Distribution(rho) => {
                let sum: f64 = rho.iter().sum();
                if rho.len() != num_states || rho.iter().any(|&p| !(p >= 0.0)) || (sum - 1.0).abs() > 1e-12 {
                    Err(Error::InvalidModel("initial distribution is not a distribution over states".into()))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }
}

/// Visit counts of the current epoch (`nu_e`) and of all earlier epochs (`N_e`).
#[derive(Debug, Clone, PartialEq)]
pub struct EpochLedger {
    num_actions: usize,
    nu: Vec<u64>,
    before: Vec<u64>,
    epoch_index: usize,
    m_factor: u64,
}

impl EpochLedger {
    pub fn new(num_states: usize, num_actions: usize, m_factor: u64) -> Self {
        assert!(m_factor >= 1, "trigger factor M must be at least 1");
        Self {
            num_actions,
            nu: vec![0; num_states * num_actions],
            before: vec![0; num_states * num_actions],
            epoch_index: 0,
            m_factor,
        }
    }

    /// Builds a ledger in an arbitrary state (tests and checkpoints).
    pub fn from_parts(num_actions: usize, nu: Vec<u64>, before: Vec<u64>, epoch_index: usize, m_factor: u64) -> Result<Self> {
        if nu.len() != before.len() || num_actions == 0 || nu.len() % num_actions != 0 || m_factor == 0 {
            return Err(Error::InvalidModel("inconsistent ledger".into()));
        }
        Ok(Self { num_actions, nu, before, epoch_index, m_factor })
    }

    pub fn record(&mut self, s: usize, a: usize) {
        self.nu[s * self.num_actions + a] += 1;
    }

    /// Closes the epoch: `N_e += nu_e`, `nu_e = 0`, `e += 1`.
    pub fn advance(&mut self) {
        for (n, v) in self.before.iter_mut().zip(self.nu.iter_mut()) {
            *n += *v;
            *v = 0;
        }
        self.epoch_index += 1;
    }

    pub fn in_epoch(&self, s: usize, a: usize) -> u64 {
        self.nu[s * self.num_actions + a]
    }

    pub fn before_epoch(&self, s: usize, a: usize) -> u64 {
        self.before[s * self.num_actions + a]
    }

    pub fn epoch_index(&self) -> usize {
        self.epoch_index
    }

    pub fn m_factor(&self) -> u64 {
        self.m_factor
    }

    /// Total visits recorded so far, across all epochs.
    pub fn steps(&self) -> u64 {
        self.nu.iter().chain(&self.before).sum()
    }
}

/// True iff some pair has `nu_e(s,a) >= max(1, N_e(s,a) / M)`.
pub fn should_trigger(ledger: &EpochLedger) -> bool {
    ledger
        .nu
        .iter()
        .zip(&ledger.before)
        .any(|(&nu, &before)| nu >= 1 && nu * ledger.m_factor >= before)
}

/// `1 + AS + M AS log2(T / SA)`, defined for `T >= SA`.
pub fn epoch_bound(num_states: usize, num_actions: usize, horizon: usize, m_factor: u64) -> Option<f64> {
    let sa = (num_states * num_actions) as f64;
    let t = horizon as f64;
    (t >= sa).then(|| 1.0 + sa + m_factor as f64 * sa * libm::log2(t / sa))
}

/// How the policy for a new epoch was obtained.
#[derive(Debug, Clone, PartialEq)]
pub enum PlanOutcome {
    /// The LP on the sampled kernel was solved; `value` is its optimum.
    Solved { value: f64 },
    /// Every sampled kernel was infeasible; the incumbent policy stays.
    KeptPrevious,
}

/// Emitted whenever a new epoch starts.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochChange {
    /// Step after which the change happened.
    pub step: usize,
    /// Index of the epoch that starts.
    pub epoch_index: usize,
    /// Last kernel drawn from the posterior.
    pub sampled_kernel: TransitionKernel,
    pub outcome: PlanOutcome,
    pub policy: StochasticPolicy,
    /// Draws taken, including the first.
    pub draws: usize,
}

/// Online CMDP-PSRL agent.
///
/// The agent reads only rewards, costs and thresholds from `model`; planning
/// always happens on kernels drawn from its own posterior.
#[derive(Debug, Clone)]
pub struct PsrlAgent<'m> {
    model: &'m TabularCmdp,
    counts: TransitionCounts,
    ledger: EpochLedger,
    policy: StochasticPolicy,
    fallback: InfeasibleFallback,
    steps: usize,
}

impl<'m> PsrlAgent<'m> {
    pub fn new(model: &'m TabularCmdp, m_factor: u64, fallback: InfeasibleFallback) -> Self {
        let (s_n, a_n) = (model.num_states(), model.num_actions());
        Self {
            model,
            counts: TransitionCounts::new(s_n, a_n),
            ledger: EpochLedger::new(s_n, a_n, m_factor),
            policy: StochasticPolicy::uniform(s_n, a_n),
            fallback,
            steps: 0,
        }
    }

    pub fn policy(&self) -> &StochasticPolicy {
        &self.policy
    }

    pub fn counts(&self) -> &TransitionCounts {
        &self.counts
    }

    pub fn ledger(&self) -> &EpochLedger {
        &self.ledger
    }

    /// Action for state `s` given a uniform variate in `[0, 1)`.
    pub fn act(&self, s: usize, u: f64) -> usize {
        self.policy.sample_action(s, u)
    }

    /// Feeds one transition. Returns the epoch change if it triggered one.
    pub fn observe<R: Rng + ?Sized>(&mut self, s: usize, a: usize, next: usize, rng: &mut R) -> Result<Option<EpochChange>> {
        self.counts.update(s, a, next)?;
        self.ledger.record(s, a);
        self.steps += 1;
        if !should_trigger(&self.ledger) {
            return Ok(None);
        }

        let attempts = match self.fallback {
            InfeasibleFallback::KeepPreviousPolicy => 1,
            InfeasibleFallback::Resample => 1 + MAX_RESAMPLES,
        };
        let mut draws = 0;
        let (sampled_kernel, outcome) = loop {
            let kernel = sample_kernel(&self.counts, rng);
            draws += 1;
            match solve_constrained_occupancy(self.model, Some(&kernel)) {
                Ok(solution) => {
                    self.policy = solution.policy;
                    break (kernel, PlanOutcome::Solved { value: solution.optimal_value });
                }
                Err(Error::Infeasible) if draws < attempts => continue,
                Err(Error::Infeasible) => break (kernel, PlanOutcome::KeptPrevious),
                Err(e) => return Err(e),
            }
        };
        self.ledger.advance();
        Ok(Some(EpochChange {
            step: self.steps - 1,
            epoch_index: self.ledger.epoch_index(),
            sampled_kernel,
            outcome,
            policy: self.policy.clone(),
            draws,
        }))
    }
}

/// Per-step trajectory of one run plus derived regret and violation curves.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub states: Vec<usize>,
    pub actions: Vec<usize>,
    pub rewards: Vec<f64>,
    /// `costs[k][t]`, raw (not direction-normalized).
    pub costs: Vec<Vec<f64>>,
    /// Epoch in which the action at `t` was taken.
    pub epochs: Vec<usize>,
    /// `(t+1) lambda* - sum_{tau<=t} r_tau`, signed.
    pub cum_regret: Vec<f64>,
    /// `violations[k][t] = (sum c_bar - (t+1) C_bar)_+` in AtMost form.
    pub violations: Vec<Vec<f64>>,
    pub lambda_star: f64,
    pub epoch_count: usize,
    pub thresholds: Vec<f64>,
    pub directions: Vec<Direction>,
}

impl RunRecord {
    pub fn horizon(&self) -> usize {
        self.rewards.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.costs.len()
    }

    /// Mean reward over steps `0..=t`.
    pub fn average_reward(&self, t: usize) -> f64 {
        self.rewards[..=t].iter().sum::<f64>() / (t + 1) as f64
    }

    /// Mean raw cost `k` over steps `0..=t`.
    pub fn average_costs(&self, t: usize) -> Vec<f64> {
        self.costs
            .iter()
            .map(|c| c[..=t].iter().sum::<f64>() / (t + 1) as f64)
            .collect()
    }
}

/// `(t+1) lambda* - sum_{tau<=t} r_tau`.
pub fn reward_regret(record: &RunRecord, t: usize) -> Result<f64> {
    record.cum_regret.get(t).copied().ok_or(Error::IndexOutOfRange)
}

/// Positive part of the cumulative normalized cost overshoot of constraint `k` up to `t`.
pub fn constraint_violation(record: &RunRecord, k: usize, t: usize) -> Result<f64> {
    record
        .violations
        .get(k)
        .and_then(|v| v.get(t))
        .copied()
        .ok_or(Error::IndexOutOfRange)
}

/// Runs CMDP-PSRL for `config.horizon` steps on the true model `cmdp`.
pub fn run(cmdp: &TabularCmdp, config: &RunConfig) -> Result<RunRecord> {
    run_with_observer(cmdp, config, |_| {})
}

/// [`run`], calling `on_epoch` for every epoch change.
pub fn run_with_observer(
    cmdp: &TabularCmdp,
    config: &RunConfig,
    mut on_epoch: impl FnMut(&EpochChange),
) -> Result<RunRecord> {
    config.validate(cmdp.num_states())?;
    let lambda_star = match solve_constrained_occupancy(cmdp, None) {
        Ok(solution) => solution.optimal_value,
        Err(Error::Infeasible) => return Err(Error::TrueModelInfeasible),
        Err(e) => return Err(e),
    };

    let horizon = config.horizon;
    let k_n = cmdp.num_constraints();
    let mut streams = RunStreams::new(config.seed);
    let mut agent = PsrlAgent::new(cmdp, config.m_factor, config.infeasible_fallback);

    let mut state = match &config.initial_state {
        InitialState::Fixed(s) => *s,
        InitialState::Distribution(rho) => sample_index(rho, streams.environment.random()),
    };

    let mut states = Vec::with_capacity(horizon);
    let mut actions = Vec::with_capacity(horizon);
    let mut rewards = Vec::with_capacity(horizon);
    let mut costs = vec![Vec::with_capacity(horizon); k_n];
    let mut epochs = Vec::with_capacity(horizon);

    for _ in 0..horizon {
        let action = agent.act(state, streams.action.random());
        states.push(state);
        actions.push(action);
        rewards.push(cmdp.reward().get(state, action));
        for (k, trace) in costs.iter_mut().enumerate() {
            trace.push(cmdp.costs()[k].get(state, action));
        }
        epochs.push(agent.ledger().epoch_index());

        let next = sample_index(cmdp.kernel().row(state, action), streams.environment.random());
        if let Some(change) = agent.observe(state, action, next, &mut streams.posterior)? {
            on_epoch(&change);
        }
        state = next;
    }

    let mut cum_regret = Vec::with_capacity(horizon);
    let mut total = 0.0;
    for (t, r) in rewards.iter().enumerate() {
        total += r;
        cum_regret.push((t + 1) as f64 * lambda_star - total);
    }

    let violations = (0..k_n)
        .map(|k| {
            let sign = cmdp.directions()[k].sign();
            let threshold = sign * cmdp.thresholds()[k];
            let mut total = 0.0;
            costs[k]
                .iter()
                .enumerate()
                .map(|(t, c)| {
                    total += sign * c;
                    (total - (t + 1) as f64 * threshold).max(0.0)
                })
                .collect()
        })
        .collect();

    Ok(RunRecord {
        states,
        actions,
        rewards,
        costs,
        epochs,
        cum_regret,
        violations,
        lambda_star,
        epoch_count: agent.ledger().epoch_index() + 1,
        thresholds: cmdp.thresholds().to_vec(),
        directions: cmdp.directions().to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{StateActionTable, TransitionKernel};

    fn ledger(nu: u64, before: u64, m: u64) -> EpochLedger {
        EpochLedger::from_parts(2, vec![nu; 4], vec![before; 4], 0, m).unwrap()
    }

    #[test]
    fn trigger_rules() {
        let mut l = ledger(0, 0, 1);
        assert!(!should_trigger(&l));
        l.record(1, 0);
        assert!(should_trigger(&l));
        assert!(!should_trigger(&ledger(3, 4, 1)));
        assert!(should_trigger(&ledger(4, 4, 1)));
        assert!(should_trigger(&ledger(1, 4, 4)));
        assert!(!should_trigger(&ledger(1, 5, 4)));
    }

    #[test]
    fn ledger_rolls_over() {
        let mut l = EpochLedger::new(2, 2, 1);
        l.record(0, 1);
        l.record(0, 1);
        l.record(1, 0);
        l.advance();
        assert_eq!((l.in_epoch(0, 1), l.before_epoch(0, 1), l.before_epoch(1, 0)), (0, 2, 1));
        assert_eq!(l.epoch_index(), 1);
        assert_eq!(l.steps(), 3);
    }

    #[test]
    fn epoch_bound_formula() {
        assert_eq!(epoch_bound(2, 2, 3, 1), None);
        assert_eq!(epoch_bound(2, 2, 4, 1), Some(5.0));
        assert_eq!(epoch_bound(2, 2, 16, 2), Some(1.0 + 4.0 + 2.0 * 4.0 * 2.0));
    }

    fn single_state(reward: f64) -> TabularCmdp {
        TabularCmdp::unconstrained(
            TransitionKernel::new(1, 1, vec![1.0]).unwrap(),
            StateActionTable::new(1, 1, vec![reward]).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn single_policy_has_zero_regret() {
        let record = run(&single_state(1.0), &RunConfig::new(200, 3)).unwrap();
        assert_eq!(record.lambda_star, 1.0);
        assert!(record.cum_regret.iter().all(|&r| r == 0.0));
        assert_eq!(reward_regret(&record, 199), Ok(0.0));
        assert_eq!(reward_regret(&record, 200), Err(Error::IndexOutOfRange));
    }

    #[test]
    fn infeasible_truth_is_an_error() {
        let cmdp = TabularCmdp::new(
            TransitionKernel::new(1, 1, vec![1.0]).unwrap(),
            StateActionTable::zeros(1, 1),
            vec![StateActionTable::new(1, 1, vec![1.0]).unwrap()],
            vec![0.0],
            vec![Direction::AtMost],
        )
        .unwrap();
        assert_eq!(run(&cmdp, &RunConfig::new(10, 0)), Err(Error::TrueModelInfeasible));
    }

    #[test]
    fn config_validation() {
        let cmdp = single_state(1.0);
        assert!(run(&cmdp, &RunConfig::new(0, 0)).is_err());
        assert!(run(&cmdp, &RunConfig::new(5, 0).with_m_factor(0)).is_err());
        let mut config = RunConfig::new(5, 0);
        config.initial_state = InitialState::Fixed(1);
        assert_eq!(run(&cmdp, &config), Err(Error::IndexOutOfRange));
        config.initial_state = InitialState::Distribution(vec![0.5]);
        assert!(run(&cmdp, &config).is_err());
    }

    fn record_with(rewards: Vec<f64>, costs: Vec<f64>, lambda_star: f64, threshold: f64) -> RunRecord {
        let t = rewards.len();
        let mut total = 0.0;
        let cum_regret = rewards
            .iter()
            .enumerate()
            .map(|(i, r)| {
                total += r;
                (i + 1) as f64 * lambda_star - total
            })
            .collect();
        let mut total = 0.0;
        let viol = costs
            .iter()
            .enumerate()
            .map(|(i, c)| {
                total += c;
                (total - (i + 1) as f64 * threshold).max(0.0)
            })
            .collect();
        RunRecord {
            states: vec![0; t],
            actions: vec![0; t],
            rewards,
            costs: vec![costs],
            epochs: vec![0; t],
            cum_regret,
            violations: vec![viol],
            lambda_star,
            epoch_count: 1,
            thresholds: vec![threshold],
            directions: vec![Direction::AtMost],
        }
    }

    #[test]
    fn regret_and_violation_arithmetic() {
        let r = record_with(vec![0.0; 10], vec![2.0; 10], 1.0, 1.0);
        for t in 0..10 {
            assert_eq!(reward_regret(&r, t), Ok((t + 1) as f64));
            assert_eq!(constraint_violation(&r, 0, t), Ok((t + 1) as f64));
        }
        let r = record_with(vec![0.25; 10], vec![0.5; 10], 0.25, 1.0);
        for t in 0..10 {
            assert_eq!(reward_regret(&r, t), Ok(0.0));
            assert_eq!(constraint_violation(&r, 0, t), Ok(0.0));
        }
        assert_eq!(constraint_violation(&r, 1, 0), Err(Error::IndexOutOfRange));
        assert_eq!(constraint_violation(&r, 0, 10), Err(Error::IndexOutOfRange));
    }
}
