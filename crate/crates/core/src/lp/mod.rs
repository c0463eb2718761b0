//! Linear programming: a generic dense simplex and the occupancy-measure LP.

mod occupancy;
mod simplex;

pub use occupancy::{build_occupancy_lp, solve_constrained_occupancy, ConstrainedSolution};
pub use simplex::{solve_lp, LinearProgram, LpSolution, LpStatus, FEASIBILITY_TOL, PIVOT_TOL, REPORTING_TOL};
