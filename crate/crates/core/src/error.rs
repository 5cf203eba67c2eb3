use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("infeasible: {reason}")]
    Infeasible {
        reason: String,
        /// Best value reached while trying (e.g. max achievable min-rate).
        certificate: Option<f64>,
    },

    #[error("no detection: {0}")]
    NoDetection(String),

    #[error("solver failure: {message}")]
    Solver { message: String, iterate: Vec<f64> },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn infeasible(reason: impl Into<String>, certificate: Option<f64>) -> Self {
        Error::Infeasible { reason: reason.into(), certificate }
    }

    pub fn is_infeasible(&self) -> bool {
        matches!(self, Error::Infeasible { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
