use thiserror::Error;

/// Errors raised by the estimation library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("path invariant violated: {0}")]
    InvariantViolation(String),

    #[error(
        "integrand and integrator both jump at t = {time}; pass use_left_limits to integrate a predictable integrand"
    )]
    JumpTie { time: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("piece {piece} has zero exposure")]
    ZeroExposure { piece: usize },

    #[error("piece {piece} has no events of the target type")]
    NoEvents { piece: usize },

    #[error("Newton iterations did not converge after {iterations} steps (score norms: {trace:?})")]
    NonConvergence { iterations: usize, trace: Vec<f64> },

    #[error("stratum {stratum} is empty")]
    EmptyStratum { stratum: usize },

    #[error("positivity violated for observation {index:?}: {what} = {value:e} at t = {time}")]
    Positivity {
        index: Option<usize>,
        what: &'static str,
        value: f64,
        time: f64,
    },

    #[error("solver error: {0}")]
    Solver(String),

    #[error("fold {fold}: {source}")]
    Fold { fold: usize, source: Box<Error> },

    #[error("scenario error: {0}")]
    Scenario(String),

    #[error("internal consistency error: {0}")]
    Internal(String),
}

impl Error {
    pub(crate) fn with_index(self, i: usize) -> Self {
        match self {
            Error::Positivity { what, value, time, .. } => Error::Positivity {
                index: Some(i),
                what,
                value,
                time,
            },
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
