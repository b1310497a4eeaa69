use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("symmetric factorization failed: {0}")]
    FactorizationFailure(String),

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("objective does not provide {0}")]
    CapabilityMissing(&'static str),

    #[error("non-finite value produced by {0}")]
    NonFiniteValue(&'static str),

    #[error("standard deviation {sigma:e} of coordinate {index} is below the minimum")]
    DegenerateVariance { index: usize, sigma: f64 },

    #[error("positive-definiteness safeguard exhausted after {0} halvings")]
    SafeguardExhausted(usize),

    #[error("regularization strength must be non-negative, got {0}")]
    NegativeRegularization(f64),

    #[error("label {value} at row {index} is not in {{-1, +1}}")]
    BadLabels { index: usize, value: f64 },

    #[error("split `{0}` is empty")]
    EmptySplit(&'static str),

    #[error("probability {0} is outside [0, 1]")]
    OutOfRange(f64),

    #[error("pool has {available} candidates, {requested} requested")]
    PoolTooSmall { requested: usize, available: usize },

    #[error("no convergence within {0} iterations")]
    MaxItersExceeded(usize),

    #[error("objective is not differentiable at this point (coordinate {0} is zero)")]
    NonSmoothPoint(usize),

    #[error("line {line}, column {column}: {reason}")]
    Parse {
        line: usize,
        column: usize,
        reason: String,
    },

    #[error("line {line}: label {value} does not belong to the expected domain")]
    LabelDomain { line: usize, value: f64 },

    #[error("invalid parameters: {0}")]
    BadParams(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("iteration {iter}: {source}")]
    AtIteration {
        iter: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn at_iteration(self, iter: usize) -> Self {
        Error::AtIteration {
            iter,
            source: Box::new(self),
        }
    }
}
