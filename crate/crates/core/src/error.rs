//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by estimators, model selection, and experiment harnesses.
#[derive(Debug, Error)]
pub enum Error {
    /// Input violates a precondition (wrong shape, out-of-range parameter,
    /// non-finite entries, empty data).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A matrix that must be positive definite is singular or indefinite.
    #[error("singular matrix: {0}")]
    Singular(String),

    /// The eigenvalue map has no unique solution (n = 0 and lambda = 0).
    #[error("underdetermined: {0}")]
    Underdetermined(String),

    /// Supervised folds cannot guarantee every class in every training fold.
    #[error("stratification error: {0}")]
    Stratification(String),

    /// An iterative routine failed to converge.
    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;
