//! Dirichlet posterior over transition kernels.

use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, Gamma};

use crate::model::TransitionKernel;
use crate::{Error, Result};

/// Dirichlet parameters `N(s,a,s')`: a per-successor prior plus observed transitions.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionCounts {
    num_states: usize,
    num_actions: usize,
    prior: f64,
    n: Vec<f64>,
}

impl TransitionCounts {
    /// Counts with the unit prior, `N(s,a,s') = 1` everywhere.
    pub fn new(num_states: usize, num_actions: usize) -> Self {
        Self::with_prior(num_states, num_actions, 1.0)
    }

    pub fn with_prior(num_states: usize, num_actions: usize, prior: f64) -> Self {
        assert!(prior > 0.0 && prior.is_finite(), "Dirichlet prior must be positive");
        Self {
            num_states,
            num_actions,
            prior,
            n: alloc::vec![prior; num_states * num_actions * num_states],
        }
    }

    /// Rebuilds counts from stored parameters; every entry must be at least the prior.
    pub fn from_parts(num_states: usize, num_actions: usize, prior: f64, n: Vec<f64>) -> Result<Self> {
        if !(prior > 0.0 && prior.is_finite()) {
            return Err(Error::InvalidModel("Dirichlet prior must be positive".into()));
        }
        if n.len() != num_states * num_actions * num_states {
            return Err(Error::InvalidModel("count tensor shape mismatch".into()));
        }
        if n.iter().any(|&c| !c.is_finite() || c < prior) {
            return Err(Error::InvalidModel("counts must be finite and at least the prior".into()));
        }
        Ok(Self { num_states, num_actions, prior, n })
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn prior(&self) -> f64 {
        self.prior
    }

    /// Records one observed transition.
    pub fn update(&mut self, s: usize, a: usize, next: usize) -> Result<()> {
        if s >= self.num_states || a >= self.num_actions || next >= self.num_states {
            return Err(Error::IndexOutOfRange);
        }
        self.n[(s * self.num_actions + a) * self.num_states + next] += 1.0;
        Ok(())
    }

    pub fn get(&self, s: usize, a: usize, next: usize) -> f64 {
        self.n[(s * self.num_actions + a) * self.num_states + next]
    }

    /// Dirichlet parameters of row `(s, a)`, prior included.
    pub fn dirichlet_params(&self, s: usize, a: usize) -> &[f64] {
        let start = (s * self.num_actions + a) * self.num_states;
        &self.n[start..start + self.num_states]
    }

    /// Observed visits `n(s,a)`, prior mass excluded.
    pub fn visits(&self, s: usize, a: usize) -> f64 {
        let total: f64 = self.dirichlet_params(s, a).iter().sum();
        total - self.prior * self.num_states as f64
    }

    pub fn total_mass(&self) -> f64 {
        self.n.iter().sum()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.n
    }
}

/// Draws a kernel with each row `P(.|s,a) ~ Dir(N(s,a,.))`.
///
/// Rows are normalized independent `Gamma(N, 1)` variates; entries are kept
/// strictly positive so every policy induces an irreducible chain.
pub fn sample_kernel<R: Rng + ?Sized>(counts: &TransitionCounts, rng: &mut R) -> TransitionKernel {
    let (s_n, a_n) = (counts.num_states, counts.num_actions);
    let mut probs = Vec::with_capacity(counts.n.len());
    for row in counts.n.chunks_exact(s_n) {
        let start = probs.len();
        for &shape in row {
            let gamma = Gamma::new(shape, 1.0).expect("counts are positive and finite");
            probs.push(gamma.sample(rng).max(f64::MIN_POSITIVE));
        }
        let sum: f64 = probs[start..].iter().sum();
        probs[start..].iter_mut().for_each(|p| *p /= sum);
    }
    TransitionKernel::from_raw(s_n, a_n, probs)
}

/// `P_hat(s'|s,a) = N(s,a,s') / sum_x N(s,a,x)`.
pub fn posterior_mean(counts: &TransitionCounts) -> TransitionKernel {
    let s_n = counts.num_states;
    let mut probs = Vec::with_capacity(counts.n.len());
    for row in counts.n.chunks_exact(s_n) {
        let sum: f64 = row.iter().sum();
        probs.extend(row.iter().map(|c| c / sum));
    }
    TransitionKernel::from_raw(s_n, counts.num_actions, probs)
}

/// l1 concentration radius `sqrt(14 S ln(2 A T) / max(1, n))`.
pub fn weissman_radius(n_sa: f64, num_states: usize, num_actions: usize, horizon: u64) -> Result<f64> {
    if num_states == 0 || num_actions == 0 || horizon == 0 {
        return Err(Error::DomainError("S, A and T must be at least one"));
    }
    let log_arg = 2.0 * num_actions as f64 * horizon as f64;
    if log_arg <= 1.0 {
        return Err(Error::DomainError("2AT must exceed one"));
    }
    if !(n_sa >= 0.0) {
        return Err(Error::DomainError("visit count must be nonnegative"));
    }
    Ok(libm::sqrt(14.0 * num_states as f64 * libm::log(log_arg) / n_sa.max(1.0)))
}

/// Whether `candidate` lies in the l1 confidence set around the posterior mean
/// for every state-action pair.
pub fn in_confidence_set(candidate: &TransitionKernel, counts: &TransitionCounts, horizon: u64) -> Result<bool> {
    let (s_n, a_n) = (counts.num_states, counts.num_actions);
    if candidate.num_states() != s_n || candidate.num_actions() != a_n {
        return Err(Error::InvalidModel("candidate kernel shape does not match counts".into()));
    }
    let mean = posterior_mean(counts);
    for s in 0..s_n {
        for a in 0..a_n {
            let radius = weissman_radius(counts.visits(s, a), s_n, a_n, horizon)?;
            let dist: f64 = candidate.row(s, a).iter().zip(mean.row(s, a)).map(|(p, q)| (p - q).abs()).sum();
            if dist > radius {
                return Ok(false);
            }
        }
    }
    Ok(true)
}
