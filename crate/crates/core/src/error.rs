use alloc::string::String;

use crate::lp::LpError;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid distribution: {0}")]
    Distribution(String),
    #[error("invalid game: {0}")]
    InvalidGame(String),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("invalid partition: {0}")]
    InvalidPartition(String),
    #[error("{line}:{column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("no Nash equilibrium found for stage game at state {state}")]
    StageNeNotFound { state: usize },
    #[error("assumption violated for objective {objective}: state {state} can avoid the target forever")]
    AssumptionViolated { objective: usize, state: usize },
    #[error("value iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("strategy has no entry for state {state} with memory {memory}")]
    MissingStrategyEntry { state: usize, memory: String },
    #[error("internal invariant violated: {0}")]
    Internal(String),
}
