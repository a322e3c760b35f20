use thiserror::Error;

/// Errors raised by the testing pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("insufficient sample: kernel of order {order} needs at least {needed} observations, got {got}")]
    InsufficientSample {
        order: usize,
        needed: usize,
        got: usize,
    },

    #[error(
        "degenerate variance at coordinates {coords:?} (variance of the centred statistic below {floor:e}); \
         consider the unnormalized statistic"
    )]
    DegenerateVariance { coords: Vec<usize>, floor: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error("matrix is not symmetric positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("resource budget exceeded: {requested} units requested, limit is {limit}")]
    Budget { requested: u128, limit: u128 },
}

impl Error {
    /// True for failures that stem from the data or arithmetic rather than
    /// from how the caller configured the run.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::DegenerateVariance { .. }
                | Error::NotPositiveDefinite(_)
                | Error::Numeric(_)
                | Error::NotApplicable(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
