use thiserror::Error;

/// Errors produced by the library, grouped by how a caller should react.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument fell outside the documented domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A numerical sanity check failed (quadrature drift, clamping overrun,
    /// a table that lost monotonicity). Indicates bad inputs or a bug, not
    /// something retries can fix.
    #[error("numeric tolerance violated: {0}")]
    Numeric(String),

    /// A root solve ran out of iterations before reaching its tolerance.
    #[error("failed to converge: {0}")]
    Convergence(String),

    /// Invalid run configuration (bad key, unparseable value, missing field).
    #[error("config error: {0}")]
    Config(String),

    /// A simulation could not complete (generation retries exhausted,
    /// routing failure).
    #[error("simulation failure: {0}")]
    Simulation(String),
}

pub type Result<T> = std::result::Result<T, Error>;
