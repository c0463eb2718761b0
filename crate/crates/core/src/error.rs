use core::fmt;

use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A model, policy or table failed validation.
    InvalidModel(String),
    /// The stationary linear system is rank-deficient beyond its one null direction.
    SingularChain,
    /// A target state cannot be reached from some other state under any policy.
    Unreachable { target: usize },
    /// The simplex kept running into pivots below the breakdown tolerance.
    NumericalBreakdown,
    /// The occupancy LP admits no feasible point.
    Infeasible,
    /// The occupancy LP is unbounded (cannot happen for a well-formed CMDP).
    Unbounded,
    /// The true model used to define the regret baseline is infeasible.
    TrueModelInfeasible,
    DomainError(&'static str),
    IndexOutOfRange,
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidModel(msg) => write!(f, "invalid model: {msg}"),
            Error::SingularChain => f.write_str("singular chain: stationary system is rank-deficient"),
            Error::Unreachable { target } => write!(f, "state {target} is unreachable"),
            Error::NumericalBreakdown => f.write_str("numerical breakdown in simplex pivoting"),
            Error::Infeasible => f.write_str("linear program is infeasible"),
            Error::Unbounded => f.write_str("linear program is unbounded"),
            Error::TrueModelInfeasible => f.write_str("true model admits no feasible policy"),
            Error::DomainError(what) => write!(f, "domain error: {what}"),
            Error::IndexOutOfRange => f.write_str("index out of range"),
        }
    }
}

impl core::error::Error for Error {}
