use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter outside its admissible domain.
    #[error("invalid parameter: {0}")]
    Param(String),

    /// The requested quantity does not exist for these parameters, e.g. a
    /// critical value when μ ≤ 1.
    #[error("no epidemic possible: {0}")]
    NoEpidemic(String),

    #[error("numeric failure: {msg} (residual {residual:e})")]
    Numeric { msg: String, residual: f64 },

    /// An operation referred to graph state that does not exist.
    #[error("internal consistency: {0}")]
    Consistency(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Param(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>, residual: f64) -> Self {
        Error::Numeric {
            msg: msg.into(),
            residual,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
