use thiserror::Error;

/// Errors produced by policylab operations.
#[derive(Debug, Error)]
pub enum Error {
    /// An augmented rule was applied to an observation without a proxy value.
    #[error("augmented rule requires a proxy, but observation {row} has none")]
    MissingProxy { row: usize },

    /// A parameter violated a documented constraint.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A propensity fell outside (0, 1), so IPW weights are undefined.
    #[error("propensity {value} at row {row} is outside (0, 1)")]
    InvalidPropensity { row: usize, value: f64 },

    /// A policy class declared an empty candidate grid.
    #[error("empty threshold grid for dimension {dim}")]
    EmptyGrid { dim: usize },

    /// The requested closed form does not exist for this generative family.
    #[error("family `{family}` has no closed form for {what}")]
    UnsupportedFamily { family: String, what: &'static str },

    /// Proxy error bound outside the regime covered by the lower-bound construction.
    #[error("rho = {rho} exceeds 1/(2*kappa) = {limit}; out of regime")]
    OutOfRegime { rho: f64, limit: f64 },

    /// A proxy was requested from fewer measurements than available.
    #[error("observation {row} has {available} measurements but {requested} were requested")]
    NotEnoughMeasurements {
        row: usize,
        available: usize,
        requested: usize,
    },

    /// Two bound-input records that must share primitives disagree.
    #[error("inconsistent bound inputs: {0}")]
    InconsistentInputs(String),

    /// A dataset failed an operation's precondition.
    #[error("dataset precondition failed: {0}")]
    Precondition(String),

    /// CSV ingestion failed.
    #[error("csv error at line {line}: {message}")]
    Csv { line: usize, message: String },

    /// Underlying I/O failure.
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
