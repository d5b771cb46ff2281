use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("length mismatch: {what} has {found} entries, expected {expected}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("non-finite {what} at index {index}")]
    NonFinite { what: &'static str, index: usize },

    #[error("invalid weight at index {index} (1-based): {value} ({reason})")]
    InvalidWeight {
        index: usize,
        value: f64,
        reason: &'static str,
    },

    #[error("weights sum to zero; cannot rescale")]
    DegenerateWeights,

    #[error("weights produce {found} firings, {needed} required")]
    TooFewFirings { needed: usize, found: usize },

    #[error("infeasible alignment: {frames} frames cannot emit a target needing {required}")]
    InfeasibleAlignment { frames: usize, required: usize },

    #[error("malformed emission grid: {0}")]
    MalformedGrid(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("enumeration bound exceeded: {0}")]
    OracleBounds(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("trace carries no compute stamps")]
    MissingComputeStamps,

    #[error("malformed trace at line {line}: {message}")]
    MalformedTrace { line: usize, message: String },

    #[error("training diverged at step {step}: loss is not finite")]
    Divergence { step: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
