use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("sample is empty")]
    EmptySample,

    #[error("length mismatch: {left} covariates but {right} responses")]
    LengthMismatch { left: usize, right: usize },

    #[error("non-finite value at index {0}")]
    NonFinite(usize),

    #[error("value {value} at index {index} lies outside [0, 1]")]
    OutsideUnitInterval { index: usize, value: f64 },

    #[error("cumulative-sum diagram needs at least 2 knots, got {0}")]
    TooFewKnots(usize),

    #[error("evaluation point {0} lies outside [0, 1]")]
    OutOfDomain(f64),

    #[error("indicator at index {index} is {value}, expected 0 or 1")]
    BadIndicator { index: usize, value: u8 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("cannot split {total} points into {blocks} blocks (m must not exceed N)")]
    TooManyBlocks { total: usize, blocks: usize },

    #[error("need at least 2 subsample estimates, got {0}")]
    TooFewEstimates(usize),

    #[error("{got} simulation draws supplied, at least {needed} required")]
    TooFewDraws { got: usize, needed: usize },

    #[error("perturbed density is negative ({value}) at t = {t}; reduce the bump amplitude")]
    NegativeDensity { t: f64, value: f64 },

    #[error("sigma_hat is zero in replicate {0}; the standardized statistic is undefined")]
    DegenerateSigma(usize),

    #[error("sigma_hat unavailable: pooled estimate has m = {0}")]
    SigmaUnavailable(usize),

    #[error("malformed draw cache: {0}")]
    MalformedCache(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
