use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("svd did not converge after {sweeps} sweeps")]
    NonConvergence { sweeps: usize },

    #[error("resource limit: {0}")]
    ResourceLimit(String),

    #[error("measurement outcome {outcome} on qubit {qubit} has zero probability")]
    MeasurementImpossible { qubit: usize, outcome: u8 },

    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: u64, message: String },

    #[error("non-finite loss at iteration {iteration} (parameter {parameter})")]
    NonFiniteLoss { iteration: usize, parameter: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn parse(offset: u64, message: impl Into<String>) -> Self {
        Error::Parse {
            offset,
            message: message.into(),
        }
    }
}
