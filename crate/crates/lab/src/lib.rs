//! Experiment runner and file formats for `cmdp-psrl`.
//!
//! The `cmdp` binary wraps these modules; everything it does is also
//! reachable as a library call.

pub mod config;
pub mod error;
pub mod experiment;
pub mod io;

pub use error::{LabError, Result};
