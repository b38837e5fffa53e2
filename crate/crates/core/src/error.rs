use thiserror::Error;

/// Errors produced while loading models or running the solvers.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed document: bad JSON, wrong field types or unknown fields.
    #[error("parse error at `{path}` (line {line}, column {column}): {message}")]
    Parse {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },

    /// Tables whose keys do not line up with the declared states and actions.
    #[error("dimension mismatch at {location}: {message}")]
    Dimension { location: String, message: String },

    /// A hard model invariant is violated (stochasticity, sojourn support, ...).
    #[error("invalid model: {check} failed at {location}: {detail}")]
    Invalid {
        check: String,
        location: String,
        detail: String,
    },

    /// Argument outside the domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// An iterative scheme did not reach its tolerance.
    #[error("solver failure: {message} (last residual {residual:e})")]
    SolverFailure {
        message: String,
        residual: f64,
        history: Vec<f64>,
    },

    /// No sign change of the monotone root function was found.
    #[error("bracket expansion exhausted after {} evaluations", trace.len())]
    BracketExhausted { trace: Vec<(f64, f64)> },

    #[error("hitting-time representation unavailable: {0}")]
    HittingTimeUnavailable(String),

    #[error("numerical overflow: {0}")]
    Overflow(String),
}

impl Error {
    pub(crate) fn solver(message: impl Into<String>, residual: f64, history: Vec<f64>) -> Self {
        Error::SolverFailure {
            message: message.into(),
            residual,
            history,
        }
    }

    pub(crate) fn invalid(
        check: impl Into<String>,
        location: impl Into<String>,
        detail: impl Into<String>,
    ) -> Self {
        Error::Invalid {
            check: check.into(),
            location: location.into(),
            detail: detail.into(),
        }
    }

    pub(crate) fn dimension(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Dimension {
            location: location.into(),
            message: message.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
