use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("too few samples: {samples} samples cannot fill {epochs} epochs of at least 2 samples")]
    TooFewSamples { samples: usize, epochs: usize },

    #[error("epoch {epoch} has {len} samples; at least 2 are required")]
    DegenerateEpoch { epoch: usize, len: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("rank-deficient covariance: smallest eigenvalue {min:e} vs largest {max:e}")]
    RankDeficient { min: f64, max: f64 },

    #[error("matrix is not symmetric positive definite{}", context.as_deref().map(|c| format!(" ({c})")).unwrap_or_default())]
    NotSpd { context: Option<String> },

    #[error("optimization failed: {0}")]
    OptimizationFailed(String),

    #[error("{0} requires exactly one channel (univariate method), got {1}")]
    Arity(&'static str, usize),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("ROC undefined: truth must contain both change and non-change boundaries")]
    UndefinedRoc,

    #[error("zero permutation spread for candidate dimension {0}")]
    DegenerateBaseline(usize),

    #[error("{failed} of {total} realizations failed")]
    TooManyFailures { failed: usize, total: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
