use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension {dim}: {reason}")]
    InvalidDimension { dim: usize, reason: &'static str },

    #[error("dimension {dim} exceeds materialization capacity {max}")]
    Capacity { dim: usize, max: usize },

    #[error("index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },

    #[error("vector not normalized: norm^2 = {norm_sqr}")]
    NotNormalized { norm_sqr: f64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error(
        "dimension {dim} is not prime; how many MUBs exist outside prime-power \
         dimensions, and what they are, is still unknown"
    )]
    UnsupportedDimension { dim: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("format error at byte {offset}: {reason}")]
    Format { offset: u64, reason: String },

    #[error("empty data: {0}")]
    Empty(&'static str),

    #[error("inconsistent inputs: {0}")]
    Inconsistent(String),

    #[error("internal invariant violated: {0}")]
    Invariant(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// Stable machine-readable kind, used in CLI error JSON.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidDimension { .. } => "invalid_dimension",
            Error::Capacity { .. } => "capacity",
            Error::IndexOutOfRange { .. } => "index_out_of_range",
            Error::NotNormalized { .. } => "not_normalized",
            Error::InvalidParameter { .. } => "invalid_parameter",
            Error::UnsupportedDimension { .. } => "unsupported_dimension",
            Error::Config(_) => "config",
            Error::Format { .. } => "format",
            Error::Empty(_) => "empty",
            Error::Inconsistent(_) => "inconsistent",
            Error::Invariant(_) => "invariant",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}
