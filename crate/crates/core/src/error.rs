use thiserror::Error;

/// Errors raised by space construction, kernels, functionals and the CLI.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("level {level} out of range for {kind} (allowed 1..={max})")]
    LevelOutOfRange {
        kind: String,
        level: usize,
        max: usize,
    },

    #[error("point index {index} out of range (space has {len} points)")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("function is bound to a different space ({found}, expected {expected})")]
    SpaceMismatch { found: String, expected: String },

    #[error("kernel model {model} is not compatible with space kind {kind}")]
    IncompatibleModel { model: String, kind: String },

    #[error("time grid: {0}")]
    TimeGrid(String),

    #[error("too few usable samples: {0}")]
    TooFewSamples(String),

    #[error("integral diverges: {0}")]
    Divergent(String),

    #[error("degenerate comparison: {0}")]
    DegenerateComparison(String),

    #[error("unknown function family `{0}`")]
    UnknownFamily(String),

    #[error("unsupported combination: {0}")]
    Unsupported(String),

    #[error("linear algebra failure: {0}")]
    LinearAlgebra(String),

    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
