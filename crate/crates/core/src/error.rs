//! Crate-wide error type.

use alloc::string::String;

/// Errors surfaced by the simulation and solver modules.
///
/// `ContractViolation` is special: it is raised by the orchestrator's
/// independent constraint audit and always indicates a controller bug, never
/// bad user input.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("cannot advance past the end of the simulation horizon")]
    EndOfHorizon,

    #[error("empty history")]
    EmptyHistory,

    #[error("queue unstable: time-average service does not exceed time-average arrivals")]
    UnstableQueue,

    #[error("tradeoff sweep needs at least 3 weight values")]
    InsufficientGrid,

    #[error("slot {slot}: constraint `{constraint}` violated: {details}")]
    ContractViolation {
        slot: u64,
        constraint: &'static str,
        details: String,
    },
}

pub type Result<T> = core::result::Result<T, Error>;
