use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// Bad configuration: malformed file, unknown strategy, invalid field value.
    #[error("config error: {0}")]
    Config(String),

    /// Operands whose dimensions do not line up.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// An argument outside the operation's documented domain.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// An operation that requires at least one element got none.
    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    /// NaN or infinity where a finite value is required.
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    /// Numerical failure (singular system, solver did not converge).
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Malformed binary container or CSV payload.
    #[error("malformed data: {0}")]
    Format(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors caused by user-supplied configuration, as opposed to
    /// runtime failures. The CLI maps these to exit code 2.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
