use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected K = {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("covariance is not positive semi-definite: factorization failed at column {column} (pivot {pivot:e})")]
    NotPositiveSemiDefinite { column: usize, pivot: f64 },

    #[error("covariance is not symmetric: entry ({row}, {col}) differs from its transpose by {diff:e}")]
    NotSymmetric { row: usize, col: usize, diff: f64 },

    #[error("design matrix is rank deficient: column `{column}` is collinear with earlier columns")]
    Singular { column: String },

    #[error("insufficient data: {needed} observations required, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("dataset has no outputs")]
    MissingOutputs,

    #[error("output {index} = {value} is not a probability in [0, 1]")]
    InvalidProbability { index: usize, value: f64 },

    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("recovery attack undefined for lambda = 0")]
    ZeroLambda,

    #[error("inconsistent parameters: claimed output noise variance {output_variance:e} exceeds residual variance {residual_variance:e}")]
    InconsistentOutputNoise {
        residual_variance: f64,
        output_variance: f64,
    },

    #[error("unsupported covariate spec: {0}")]
    UnsupportedSpec(String),

    #[error("moment E[1/sum x^2] undefined for n = {n} (need n > 2)")]
    UndefinedMoment { n: usize },

    #[error("sign search over {k} regressors exceeds the exhaustive limit of {limit}")]
    TooManyRegressors { k: usize, limit: usize },

    #[error("output error: {0}")]
    Output(String),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
