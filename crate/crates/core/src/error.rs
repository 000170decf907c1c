use thiserror::Error;

/// Why a chain was aborted.
#[derive(Debug, Clone, PartialEq)]
pub enum Divergence {
    /// The stochastic gradient had a NaN or infinite entry.
    NonFiniteGradient,
    /// The iterate left the guard ball `1e6 * (1 + |x0|)`.
    Escaped { norm: f64, limit: f64 },
}

impl std::fmt::Display for Divergence {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Divergence::NonFiniteGradient => write!(f, "non-finite stochastic gradient"),
            Divergence::Escaped { norm, limit } => {
                write!(f, "iterate norm {norm:e} exceeded guard {limit:e}")
            }
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not symmetric positive definite")]
    NotPositiveDefinite,

    #[error("histogram bin width must be positive and finite, got {0}")]
    InvalidBinWidth(f64),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("reference coordinate {coordinate} has zero standard deviation")]
    ZeroReferenceSpread { coordinate: usize },

    #[error("term does not provide a Hessian")]
    HessianUnsupported,

    #[error("term does not provide a Lipschitz constant")]
    LipschitzUnknown,

    #[error("term is not conjugate to a Gaussian posterior")]
    NotConjugate,

    #[error("chain diverged at step {step}: {reason}")]
    Diverged { step: u64, reason: Divergence },

    #[error("gradient cache is empty at epoch {0}")]
    EmptyCache(usize),

    #[error("gradient cache covers {cached} terms but the chain is at epoch {epoch}")]
    CacheMismatch { cached: usize, epoch: usize },

    #[error("epoch order violation: epoch {epoch} requested but the stream holds {available} terms")]
    EpochOrder { epoch: usize, available: usize },

    #[error("optimizer did not converge: gradient norm {grad_norm:e} after {iterations} iterations")]
    NoConvergence { iterations: usize, grad_norm: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("malformed data: {0}")]
    Data(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn is_divergence(&self) -> bool {
        matches!(self, Error::Diverged { .. })
    }

    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_) | Error::Json(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
