use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A model parameter violates a standing assumption.
    #[error("invalid model: {0}")]
    InvalidModel(String),

    /// An argument fell outside the domain of an operation.
    #[error("{op}: {detail}")]
    Domain { op: &'static str, detail: String },

    /// Configuration could not be parsed; `key` is the path of the offending entry.
    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },

    /// The game value is infinite for these parameters.
    #[error("game value is infinite (-y < r/(4s))")]
    InfiniteValue,

    /// A numerical routine failed to converge or produced a nonfinite value.
    #[error("numerical failure: {0}")]
    Numeric(String),
}

impl Error {
    pub(crate) fn domain(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Domain {
            op,
            detail: detail.into(),
        }
    }
}
