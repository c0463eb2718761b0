//! Occupancy-measure LP for constrained average-reward planning.
//!
//! Variables are `d(s,a)`, indexed `s * A + a`. The program is
//!
//! ```text
//! maximize   sum r(s,a) d(s,a)
//! subject to sum_a d(s',a) - sum_{s,a} P(s'|s,a) d(s,a) = 0   for s' in 0..S-1
//!            sum d(s,a) = 1
//!            sum c_k(s,a) d(s,a) <= C_k                       (AtMost form)
//!            d >= 0
//! ```
//!
//! The flow row of the last state is implied by the others plus the mass
//! row and is left out.

use alloc::vec;

use super::simplex::{solve_lp, LinearProgram, LpStatus};
use crate::model::{
    policy_from_occupancy, OccupancyMeasure, StateActionTable, StochasticPolicy, TabularCmdp,
    TransitionKernel,
};
use crate::{Error, Result};

/// Builds the occupancy LP for `cmdp`, optionally on a replacement kernel.
pub fn build_occupancy_lp(cmdp: &TabularCmdp, kernel_override: Option<&TransitionKernel>) -> LinearProgram {
    let kernel = kernel_override.unwrap_or(cmdp.kernel());
    let (s_n, a_n) = (cmdp.num_states(), cmdp.num_actions());
    debug_assert_eq!(kernel.num_states(), s_n);
    debug_assert_eq!(kernel.num_actions(), a_n);
    let n = s_n * a_n;

    let mut lp = LinearProgram::new(cmdp.reward().as_slice().to_vec());
    for target in 0..s_n.saturating_sub(1) {
        let mut row = vec![0.0; n];
        for s in 0..s_n {
            for a in 0..a_n {
                row[s * a_n + a] -= kernel.prob(s, a, target);
            }
        }
        for a in 0..a_n {
            row[target * a_n + a] += 1.0;
        }
        lp.add_eq(row, 0.0);
    }
    lp.add_eq(vec![1.0; n], 1.0);
    for k in 0..cmdp.num_constraints() {
        let (cost, threshold) = cmdp.normalized_constraint(k);
        lp.add_le(cost.as_slice().to_vec(), threshold);
    }
    lp
}

/// Result of constrained planning on one kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstrainedSolution {
    pub occupancy: OccupancyMeasure,
    pub policy: StochasticPolicy,
    pub optimal_value: f64,
}

/// Solves the occupancy LP and extracts the conditional policy.
///
/// Returns [`Error::Infeasible`] when no stationary distribution satisfies
/// every constraint on the kernel used.
pub fn solve_constrained_occupancy(
    cmdp: &TabularCmdp,
    kernel_override: Option<&TransitionKernel>,
) -> Result<ConstrainedSolution> {
    if let Some(kernel) = kernel_override {
        if kernel.num_states() != cmdp.num_states() || kernel.num_actions() != cmdp.num_actions() {
            return Err(Error::InvalidModel("kernel override shape does not match model".into()));
        }
    }
    let lp = build_occupancy_lp(cmdp, kernel_override);
    let solution = solve_lp(&lp)?;
    match solution.status {
        LpStatus::Optimal => {}
        LpStatus::Infeasible => return Err(Error::Infeasible),
        LpStatus::Unbounded => return Err(Error::Unbounded),
    }
    let table = StateActionTable::new(cmdp.num_states(), cmdp.num_actions(), solution.x)?;
    let occupancy = OccupancyMeasure::unchecked(table);
    let policy = policy_from_occupancy(&occupancy);
    Ok(ConstrainedSolution { occupancy, policy, optimal_value: solution.objective_value })
}
