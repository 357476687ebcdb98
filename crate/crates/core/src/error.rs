use thiserror::Error;

/// Errors raised by the simulator.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum QkdError {
    #[error("OAM index {oam} outside truncation |l| <= {l_max}")]
    Truncation { oam: i32, l_max: u32 },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("operator expected to be unitary changed the squared norm by {deviation:e}")]
    NormViolation { deviation: f64 },

    #[error("zero-norm state")]
    ZeroNorm,

    #[error("non-finite amplitude or matrix entry")]
    NonFinite,

    #[error("projectors are not complete on the state's support (deviation {deviation:e})")]
    IncompleteProjectors { deviation: f64 },

    #[error("invalid density matrix: {0}")]
    InvalidDensityMatrix(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("insufficient statistics: at least {required_pulses} pulses are needed")]
    InsufficientStatistics { required_pulses: u64 },

    #[error("sifted key is empty")]
    EmptyKey,

    #[error("tomography setting {0} missing")]
    MissingSetting(String),

    #[error("degenerate count data: {0}")]
    DegenerateCounts(String),

    #[error(transparent)]
    Codec(#[from] crate::channel::CodecError),
}

pub type Result<T> = std::result::Result<T, QkdError>;

pub(crate) fn invalid(msg: impl Into<String>) -> QkdError {
    QkdError::InvalidParameter(msg.into())
}
