//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cell {cell} serves no users")]
    EmptyCell { cell: usize },

    #[error("user {user} is served by both cell {first} and cell {second}")]
    UserServedTwice {
        user: usize,
        first: usize,
        second: usize,
    },

    #[error("user {user} is not served by any cell")]
    UserUnserved { user: usize },

    #[error("cell {cell} references user {user}, but the gain matrix only covers {total} users")]
    UserOutOfRange {
        cell: usize,
        user: usize,
        total: usize,
    },

    #[error("user {user} is not served by cell {cell}")]
    NotServedBy { cell: usize, user: usize },

    #[error("gain from cell {cell} to user {user} is {value}, must be finite and non-negative")]
    InvalidGain {
        cell: usize,
        user: usize,
        value: f64,
    },

    #[error("serving gain for user {user} in cell {cell} must be strictly positive")]
    ZeroServingGain { cell: usize, user: usize },

    #[error("noise power is {value}, must be finite and non-negative")]
    InvalidNoise { value: f64 },

    #[error("{what} has length {found}, expected {expected}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("{what}[{index}] = {value}: {requirement}")]
    InvalidEntry {
        what: &'static str,
        index: usize,
        value: f64,
        requirement: &'static str,
    },

    #[error("{what} = {value}: {requirement}")]
    InvalidParameter {
        what: &'static str,
        value: f64,
        requirement: &'static str,
    },

    #[error("non-finite {what} produced at index {index}")]
    NonFiniteValue { what: &'static str, index: usize },

    #[error(
        "SINR denominator for user {user} in cell {cell} is zero \
         (zero noise power and zero total interference)"
    )]
    ZeroSinrDenominator { cell: usize, user: usize },

    #[error("rates are not satisfiable: coupling spectral radius {rho} is not below 1")]
    Unsatisfiable { rho: f64 },

    #[error(
        "cell {cell} needs more than {limit} W to meet its load target; \
         the target load is not implementable"
    )]
    PowerDiverged { cell: usize, limit: f64 },

    #[error(
        "full load is not implementable for the given demands, \
         so no load in (0, 1] admits a feasible power; the problem has no solution"
    )]
    FullLoadNotImplementable,

    #[error(
        "solver stopped after {iterations} iterations with residual {residual} (no convergence)"
    )]
    SolverStalled { iterations: usize, residual: f64 },

    #[error(
        "no uniform power level in [{beta_lo}, {beta_hi}] W keeps every cell load at or below 1"
    )]
    NoFeasibleBeta { beta_lo: f64, beta_hi: f64 },

    #[error("scenario version {found} is not supported (expected {expected})")]
    UnsupportedVersion { found: u32, expected: u32 },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Parse {
        path: String,
        #[source]
        source: serde_json::Error,
    },
}
