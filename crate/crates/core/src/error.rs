use thiserror::Error;

/// Errors raised by frame construction, channel modelling and detection.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum OtfsError {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: String, found: String },

    #[error("length mismatch: expected {expected} samples, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("tap {tap} has fractional Doppler {doppler} on the frame grid; the closed form needs integer bins")]
    FractionalDoppler { tap: usize, doppler: f64 },

    #[error("singular channel: {} zero eigenvalue bin(s), first at {:?}", bins.len(), bins.first())]
    SingularChannel { bins: Vec<(usize, usize)> },

    #[error("singular matrix")]
    SingularMatrix,

    #[error("matrix is not {pattern}: off-pattern residual {residual:e}")]
    NotStructured { pattern: &'static str, residual: f64 },

    #[error("non-finite message in message passing at iteration {iteration}")]
    NumericalFailure { iteration: usize },

    #[error("zero-energy input")]
    ZeroEnergy,

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("serialization: {0}")]
    Serialization(String),
}

impl From<serde_json::Error> for OtfsError {
    fn from(e: serde_json::Error) -> Self {
        OtfsError::Serialization(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, OtfsError>;
