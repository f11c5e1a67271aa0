use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Inconsistent dimensions or an unusable configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// A parameter is outside its admissible range.
    #[error("validation error: {0}")]
    Validation(String),

    /// A matrix that must be positive definite is not (numerically).
    #[error("numerical conditioning error: {0}")]
    Conditioning(String),

    #[error("constraint violation: {0}")]
    ConstraintViolation(String),

    #[error("solver failed at outer iteration {iteration}: {source}")]
    Solver {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("infeasible start: {0}")]
    Infeasible(String),

    #[error("unknown realization `{name}` (available: {available})")]
    UnknownRealization { name: String, available: String },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn at_iteration(self, iteration: usize) -> Self {
        match self {
            e @ Error::Solver { .. } => e,
            other => Error::Solver {
                iteration,
                source: Box::new(other),
            },
        }
    }
}
