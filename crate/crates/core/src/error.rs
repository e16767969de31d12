//! Error types shared across the crate.
//!
//! Recoverable conditions get typed errors; dimension mismatches between
//! vectors and objectives are programmer errors and panic via assertions.

use std::path::PathBuf;

use thiserror::Error;

/// Errors from dataset parsing and hierarchy construction.
#[derive(Debug, Error)]
pub enum DataError {
    /// A malformed input line; `line` is 1-based.
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// The label set cannot be mapped onto {-1, +1}.
    #[error("cannot map labels onto {{-1, +1}}: found {0}")]
    Labels(String),

    /// Invalid sizes, overrides, or other configuration.
    #[error("invalid data configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Errors raised while running a solver.
#[derive(Debug, Error)]
pub enum SolverError {
    /// Conjugate gradient met a direction of non-positive curvature.
    #[error("conjugate gradient breakdown: <p, Ap> = {pap:e}")]
    CgBreakdown { pap: f64 },

    /// A numeric quantity became NaN or infinite inside a solver kernel.
    #[error("non-finite value encountered in {context}")]
    NonFinite { context: &'static str },

    /// Backtracking was asked to search along a non-descent direction.
    #[error("not a descent direction: <g, p> = {slope:e} >= 0")]
    NotDescent { slope: f64 },

    /// The Armijo condition was never met within the backtracking budget.
    #[error("line search failed after {backtracks} backtracks (last step {alpha:e})")]
    LineSearchFailed { backtracks: usize, alpha: f64 },

    /// Inconsistent solver or cycle configuration.
    #[error("invalid solver configuration: {0}")]
    Config(String),
}

/// Errors from the experiment-running layer.
#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Data(#[from] DataError),

    #[error(transparent)]
    Solver(#[from] SolverError),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("invalid experiment configuration: {0}")]
    Config(String),

    #[error("malformed trace CSV at line {line}: {msg}")]
    TraceFormat { line: usize, msg: String },
}
