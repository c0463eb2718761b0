//! Benchmark models.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, Exp1};

use crate::analysis::{average_under, stationary_distribution};
use crate::model::{Direction, StateActionTable, StochasticPolicy, TabularCmdp, TransitionKernel};
use crate::rng::{stream_rng, Stream};
use crate::{Error, Result};

/// Single-server queue with finite buffer, controlled by a service
/// probability `a` and an arrival (flow) probability `b`.
#[derive(Debug, Clone, PartialEq)]
pub struct QueueSpec {
    pub buffer: usize,
    pub service_actions: Vec<f64>,
    pub flow_actions: Vec<f64>,
}

impl Default for QueueSpec {
    /// Buffer 5, service `{0.2, 0.4, 0.6, 0.8}`, flow `{0.5, 0.6, 0.7, 0.8}`.
    fn default() -> Self {
        Self {
            buffer: 5,
            service_actions: vec![0.2, 0.4, 0.6, 0.8],
            flow_actions: vec![0.5, 0.6, 0.7, 0.8],
        }
    }
}

impl QueueSpec {
    pub fn validate(&self) -> Result<()> {
        if self.buffer < 1 {
            return Err(Error::InvalidModel("queue buffer must be at least 1".into()));
        }
        for (name, list) in [("service", &self.service_actions), ("flow", &self.flow_actions)] {
            if list.is_empty() {
                return Err(Error::InvalidModel(format!("{name} action set is empty")));
            }
            if list.iter().any(|&p| !(p > 0.0 && p < 1.0)) {
                return Err(Error::InvalidModel(format!("{name} actions must lie in (0, 1)")));
            }
            if list.windows(2).any(|w| w[0] > w[1]) {
                return Err(Error::InvalidModel(format!("{name} actions must be ascending")));
            }
        }
        Ok(())
    }

    pub fn num_states(&self) -> usize {
        self.buffer + 1
    }

    pub fn num_actions(&self) -> usize {
        self.service_actions.len() * self.flow_actions.len()
    }

    /// `(service, flow)` probabilities of action index `i` (service-major).
    pub fn action(&self, i: usize) -> (f64, f64) {
        let flows = self.flow_actions.len();
        (self.service_actions[i / flows], self.flow_actions[i % flows])
    }

    /// `[P(x-1), P(x), P(x+1)]` for queue length `x` under `(service, flow)`.
    pub fn step_probs(&self, x: usize, service: f64, flow: f64) -> [f64; 3] {
        let (a, b) = (service, flow);
        if x == 0 {
            [0.0, 1.0 - b * (1.0 - a), b * (1.0 - a)]
        } else if x == self.buffer {
            [a, 1.0 - a, 0.0]
        } else {
            [a * (1.0 - b), a * b + (1.0 - a) * (1.0 - b), (1.0 - a) * b]
        }
    }
}

/// Builds the queue CMDP: reward `5 - x`, service cost `-10a + 6` and flow cost
/// `-8(1-b)^2 + 2`, both constrained to average at least 0.
pub fn build_queue_env(spec: &QueueSpec) -> Result<TabularCmdp> {
    spec.validate()?;
    let (s_n, a_n) = (spec.num_states(), spec.num_actions());
    let kernel = TransitionKernel::from_fn(s_n, a_n, |x, i, next| {
        let (a, b) = spec.action(i);
        let [down, stay, up] = spec.step_probs(x, a, b);
        if next + 1 == x {
            down
        } else if next == x {
            stay
        } else if next == x + 1 {
            up
        } else {
            0.0
        }
    })?;
    let reward = StateActionTable::from_fn(s_n, a_n, |x, _| 5.0 - x as f64);
    let service_cost = StateActionTable::from_fn(s_n, a_n, |_, i| -10.0 * spec.action(i).0 + 6.0);
    let flow_cost = StateActionTable::from_fn(s_n, a_n, |_, i| {
        let b = spec.action(i).1;
        -8.0 * (1.0 - b) * (1.0 - b) + 2.0
    });
    TabularCmdp::new(
        kernel,
        reward,
        vec![service_cost, flow_cost],
        vec![0.0, 0.0],
        vec![Direction::AtLeast, Direction::AtLeast],
    )
}

/// Random CMDP whose kernel rows are `Dir(1, ..., 1)` draws (strictly positive,
/// hence every policy is ergodic), with rewards and costs uniform on `[0, 1]`.
///
/// Each threshold sits slightly above the uniform policy's average cost, so
/// the uniform policy is always feasible.
pub fn random_ergodic_cmdp(seed: u64, num_states: usize, num_actions: usize, num_constraints: usize) -> Result<TabularCmdp> {
    if num_states == 0 || num_actions == 0 {
        return Err(Error::InvalidModel("need at least one state and action".into()));
    }
    let mut rng = stream_rng(seed, Stream::Generator);
    let mut probs = Vec::with_capacity(num_states * num_actions * num_states);
    for _ in 0..num_states * num_actions {
        let start = probs.len();
        for _ in 0..num_states {
            let e: f64 = Exp1.sample(&mut rng);
            probs.push(e.max(f64::MIN_POSITIVE));
        }
        let sum: f64 = probs[start..].iter().sum();
        probs[start..].iter_mut().for_each(|p| *p /= sum);
    }
    let kernel = TransitionKernel::from_raw(num_states, num_actions, probs);
    let reward = StateActionTable::from_fn(num_states, num_actions, |_, _| rng.random::<f64>());
    let costs: Vec<StateActionTable> = (0..num_constraints)
        .map(|_| StateActionTable::from_fn(num_states, num_actions, |_, _| rng.random::<f64>()))
        .collect();

    let uniform = StochasticPolicy::uniform(num_states, num_actions);
    let d = stationary_distribution(&kernel, &uniform)?;
    let thresholds = costs
        .iter()
        .map(|c| average_under(&d, &uniform, c) + 0.05 * rng.random::<f64>())
        .collect();
    TabularCmdp::new(kernel, reward, costs, thresholds, vec![Direction::AtMost; num_constraints])
}
