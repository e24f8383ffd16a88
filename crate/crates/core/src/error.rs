use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("graph is not regular (degrees range {min}..={max}); use the metropolis scheme")]
    IrregularGraph { min: usize, max: usize },

    #[error("not a valid gossip matrix: {0}")]
    InvalidGossipMatrix(String),

    #[error("degenerate spectrum: {0}")]
    DegenerateSpectrum(String),

    #[error("graph is disconnected: {0}")]
    Disconnected(String),

    #[error("numeric failure: {0}")]
    NumericFailure(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>) -> Self {
        Error::NumericFailure(msg.into())
    }

    /// Whether the failure comes from the numerics rather than from the inputs.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::NumericFailure(_) | Error::DegenerateSpectrum(_) | Error::Disconnected(_)
        )
    }
}
