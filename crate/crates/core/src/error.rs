//! Error type shared across the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Grid dimensions that leave fewer than two playable cells.
    #[error("invalid size: {0}")]
    InvalidSize(String),

    /// A grid whose construction-time invariants fail (walls out of bounds,
    /// disconnected free cells, ...).
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    /// A goal placed on a wall or outside the grid.
    #[error("invalid goal: {0}")]
    InvalidGoal(String),

    /// Out-of-range hyperparameters or options.
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    /// Empty traces, empty libraries, bad fractions and similar misuse.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A value that violates a documented type invariant (e.g. a negative
    /// Q-value fed to the normalization policy).
    #[error("contract violation: {0}")]
    ContractViolation(String),

    /// Scenario files whose event sequence or references are inconsistent.
    #[error("scenario validation: {0}")]
    ScenarioValidation(String),

    /// An artifact (Q-table, trace) paired with a grid it was not built on.
    #[error("spec mismatch: {0}")]
    SpecMismatch(String),

    /// Malformed input documents. Line information is included when the
    /// source format is line-oriented.
    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Stable machine-readable class, used by the CLI for exit reporting.
    pub fn class(&self) -> &'static str {
        match self {
            Error::InvalidSize(_) => "invalid-size",
            Error::InvalidGrid(_) => "invalid-grid",
            Error::InvalidGoal(_) => "invalid-goal",
            Error::InvalidConfig(_) => "invalid-config",
            Error::InvalidInput(_) => "invalid-input",
            Error::ContractViolation(_) => "contract-violation",
            Error::ScenarioValidation(_) => "scenario-validation",
            Error::SpecMismatch(_) => "spec-mismatch",
            Error::Parse(_) => "parse-error",
            Error::Io(_) => "io-error",
        }
    }
}
