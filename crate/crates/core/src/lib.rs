//! Posterior sampling for tabular constrained Markov decision processes.
//!
//! The crate is split along the learning pipeline:
//!
//! - [`model`] and [`analysis`]: the CMDP data model plus exact planning
//!   primitives on known models (stationary distributions, long-run averages,
//!   diameter, gain and bias).
//! - [`lp`]: a dense two-phase primal simplex and the occupancy-measure LP
//!   that turns a (possibly sampled) kernel into a constrained-optimal
//!   stationary policy.
//! - [`posterior`]: Dirichlet transition posterior, seeded kernel sampling and
//!   the l1 confidence sets used in the regret analysis.
//! - [`agent`]: the epoch-based CMDP-PSRL learning loop with regret and
//!   constraint-violation accounting.
//! - [`envs`]: the single-server queue benchmark and random ergodic instances.
//!
//! Everything here is `no_std` + `alloc`; file formats, the experiment
//! runner and the CLI live in the `cmdp-lab` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod agent;
pub mod analysis;
mod error;
pub mod envs;
mod linalg;
pub mod lp;
pub mod model;
pub mod posterior;
pub mod rng;

pub use error::{Error, Result};
pub use model::{
    Direction, OccupancyMeasure, Signal, StateActionTable, StochasticPolicy, TabularCmdp,
    TransitionKernel,
};
