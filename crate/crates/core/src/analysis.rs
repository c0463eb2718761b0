//! Exact planning and analysis primitives on known models.

use alloc::vec;
use alloc::vec::Vec;

use crate::linalg;
use crate::model::{Signal, StateActionTable, StochasticPolicy, TabularCmdp, TransitionKernel};
use crate::{Error, Result};

/// Iteration cap shared by the iterative solvers in this module.
pub const MAX_ITERATIONS: usize = 1_000_000;
/// Sup-norm convergence tolerance for iterative solvers.
pub const CONVERGENCE_TOL: f64 = 1e-9;
/// Residual tolerance for the gain/bias equations.
pub const BIAS_RESIDUAL_TOL: f64 = 1e-9;

/// Stationary distribution of the chain induced by `policy` on `kernel`.
///
/// Solves `(M^T - I) d = 0` with one balance row replaced by `sum d = 1`.
pub fn stationary_distribution(kernel: &TransitionKernel, policy: &StochasticPolicy) -> Result<Vec<f64>> {
    check_policy_shape(kernel, policy)?;
    let chain = kernel.induced_chain(policy);
    stationary_of_chain(&chain, kernel.num_states())
}

pub(crate) fn stationary_of_chain(chain: &[f64], n: usize) -> Result<Vec<f64>> {
    let mut system = vec![0.0; n * n];
    for row in 0..n {
        for col in 0..n {
            system[row * n + col] = chain[col * n + row] - if row == col { 1.0 } else { 0.0 };
        }
    }
    for col in 0..n {
        system[(n - 1) * n + col] = 1.0;
    }
    let mut rhs = vec![0.0; n];
    rhs[n - 1] = 1.0;
    let mut d = linalg::solve(system, rhs).ok_or(Error::SingularChain)?;
    if d.iter().any(|&x| !x.is_finite() || x < -1e-9) {
        return Err(Error::SingularChain);
    }
    d.iter_mut().for_each(|x| *x = x.max(0.0));
    let total: f64 = d.iter().sum();
    d.iter_mut().for_each(|x| *x /= total);
    Ok(d)
}

/// Long-run average of `signal` under `policy`: `sum_{s,a} f(s,a) d(s) pi(a|s)`.
pub fn long_run_average(cmdp: &TabularCmdp, policy: &StochasticPolicy, signal: Signal) -> Result<f64> {
    let table = cmdp.signal(signal)?;
    let d = stationary_distribution(cmdp.kernel(), policy)?;
    Ok(average_under(&d, policy, table))
}

pub(crate) fn average_under(d: &[f64], policy: &StochasticPolicy, table: &StateActionTable) -> f64 {
    let mut total = 0.0;
    for (s, &ds) in d.iter().enumerate() {
        for a in 0..policy.num_actions() {
            total += table.get(s, a) * ds * policy.prob(s, a);
        }
    }
    total
}

/// `max_{s != s'} min_pi E[T(s'|pi, s)]`, via value iteration on the optimal
/// expected hitting-time equations for each target.
pub fn diameter(kernel: &TransitionKernel) -> Result<f64> {
    let n = kernel.num_states();
    let mut worst = 0.0f64;
    for target in 0..n {
        let times = hitting_times(kernel, target)?;
        worst = times.iter().fold(worst, |m, &h| m.max(h));
    }
    Ok(worst)
}

/// Minimal expected hitting times of `target` from every state (zero at the target).
pub fn hitting_times(kernel: &TransitionKernel, target: usize) -> Result<Vec<f64>> {
    let n = kernel.num_states();
    if target >= n {
        return Err(Error::IndexOutOfRange);
    }
    if !all_reach(kernel, target) {
        return Err(Error::Unreachable { target });
    }
    let mut h = vec![0.0; n];
    let mut next = vec![0.0; n];
    for _ in 0..MAX_ITERATIONS {
        let mut change = 0.0f64;
        for s in 0..n {
            if s == target {
                next[s] = 0.0;
                continue;
            }
            let best = (0..kernel.num_actions())
                .map(|a| {
                    kernel
                        .row(s, a)
                        .iter()
                        .zip(&h)
                        .enumerate()
                        .filter(|&(x, _)| x != target)
                        .map(|(_, (p, hx))| p * hx)
                        .sum::<f64>()
                })
                .fold(f64::INFINITY, f64::min);
            next[s] = 1.0 + best;
            change = change.max((next[s] - h[s]).abs());
        }
        core::mem::swap(&mut h, &mut next);
        if change < CONVERGENCE_TOL {
            return Ok(h);
        }
    }
    Err(Error::Unreachable { target })
}

/// Whether every state has a positive-probability path to `target`.
fn all_reach(kernel: &TransitionKernel, target: usize) -> bool {
    let n = kernel.num_states();
    let mut reaches = vec![false; n];
    reaches[target] = true;
    let mut grew = true;
    while grew {
        grew = false;
        for s in 0..n {
            if reaches[s] {
                continue;
            }
            let hit = (0..kernel.num_actions())
                .any(|a| kernel.row(s, a).iter().zip(&reaches).any(|(&p, &r)| r && p > 0.0));
            if hit {
                reaches[s] = true;
                grew = true;
            }
        }
    }
    reaches.iter().all(|&r| r)
}

/// Gain and bias of `policy` for `signal`: solves `v = f_pi - g 1 + M v` with
/// `v(0) = 0`.
pub fn gain_and_bias(
    kernel: &TransitionKernel,
    policy: &StochasticPolicy,
    signal: &StateActionTable,
) -> Result<(f64, Vec<f64>)> {
    check_policy_shape(kernel, policy)?;
    if signal.num_states() != kernel.num_states() || signal.num_actions() != kernel.num_actions() {
        return Err(Error::InvalidModel("signal shape does not match kernel".into()));
    }
    let n = kernel.num_states();
    let chain = kernel.induced_chain(policy);
    let f_pi: Vec<f64> = (0..n)
        .map(|s| signal.row(s).iter().zip(policy.row(s)).map(|(f, p)| f * p).sum())
        .collect();

    // Unknowns (v_0..v_{n-1}, g).
    let dim = n + 1;
    let mut system = vec![0.0; dim * dim];
    let mut rhs = vec![0.0; dim];
    for s in 0..n {
        for x in 0..n {
            system[s * dim + x] = if s == x { 1.0 } else { 0.0 } - chain[s * n + x];
        }
        system[s * dim + n] = 1.0;
        rhs[s] = f_pi[s];
    }
    system[n * dim] = 1.0;
    let sol = linalg::solve(system, rhs).ok_or(Error::SingularChain)?;
    let gain = sol[n];
    let bias = sol[..n].to_vec();

    let scale = 1.0 + f_pi.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for s in 0..n {
        let mv: f64 = (0..n).map(|x| chain[s * n + x] * bias[x]).sum();
        if (bias[s] - f_pi[s] + gain - mv).abs() > BIAS_RESIDUAL_TOL * scale {
            return Err(Error::SingularChain);
        }
    }
    Ok((gain, bias))
}

/// `max(v) - min(v)`.
pub fn span(values: &[f64]) -> f64 {
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if values.is_empty() { 0.0 } else { hi - lo }
}

/// Bias span of a policy compared against the diameter bound scaled by `max |f|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpanCheck {
    pub span: f64,
    pub diameter: f64,
    pub signal_scale: f64,
}

impl SpanCheck {
    pub fn bound(&self) -> f64 {
        self.signal_scale * self.diameter
    }

    pub fn holds(&self) -> bool {
        self.span <= self.bound() + 1e-9
    }
}

pub fn check_span_bound(
    kernel: &TransitionKernel,
    policy: &StochasticPolicy,
    signal: &StateActionTable,
) -> Result<SpanCheck> {
    let (_, bias) = gain_and_bias(kernel, policy, signal)?;
    Ok(SpanCheck {
        span: span(&bias),
        diameter: diameter(kernel)?,
        signal_scale: signal.max_abs(),
    })
}

fn check_policy_shape(kernel: &TransitionKernel, policy: &StochasticPolicy) -> Result<()> {
    if policy.num_states() != kernel.num_states() || policy.num_actions() != kernel.num_actions() {
        return Err(Error::InvalidModel("policy shape does not match kernel".into()));
    }
    Ok(())
}
