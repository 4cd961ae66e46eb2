use thiserror::Error;

/// Errors raised by the estimation library and the command-line front end.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("numerical failure: {message}")]
    Numerical {
        message: String,
        /// Last finite iterate reached before the failure, when there is one.
        last_iterate: Option<Vec<f64>>,
    },

    #[error("ill-conditioned matrix (condition number {condition:.3e})")]
    Conditioning { condition: f64 },

    #[error("no tuning parameter reaches the target efficiency {target} on (0, {upper}]")]
    NoSolution { target: f64, upper: f64 },

    #[error("insufficient draws: need {needed}, have {available}")]
    InsufficientDraws { needed: usize, available: usize },

    #[error("row {row}: {message}")]
    Input { row: usize, message: String },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn numerical(message: impl Into<String>) -> Self {
        Error::Numerical { message: message.into(), last_iterate: None }
    }

    /// Process exit status: 2 for bad input, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Numerical { .. }
            | Error::Conditioning { .. }
            | Error::NoSolution { .. }
            | Error::InsufficientDraws { .. } => 3,
            _ => 2,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
