use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid link parameter: {0}")]
    InvalidLinkParameter(String),
    #[error("response rate must be positive, got {0}")]
    InvalidRate(f64),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("link is not monotone")]
    NonMonotoneLink,
    #[error("prox bracket expansion failed at x = {0}")]
    BracketFailure(f64),
    #[error("estimator does not exist (iterates diverge)")]
    Diverged,
    #[error("Hessian is singular")]
    SingularHessian,
    #[error("no convergence after {0} iterations")]
    NoConvergence(usize),
    #[error("true coefficients are required")]
    MissingTruth,
    #[error("variance proposal is not positive ({0})")]
    NegativeVariance(f64),
    #[error("signal strength is too small to identify the bias factor")]
    DegenerateSignal,
    #[error("link has a constant even part, signal strength is not identifiable")]
    OddLink,
    #[error("target mean {0} lies outside the range of the simulated mean curve")]
    NoBracket(f64),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("design matrix is rank deficient")]
    RankDeficient,
    #[error("bias factor must be positive, got {0}")]
    NonPositiveMu(f64),
    #[error("Fisher information is singular")]
    SingularInformation,
    #[error("value {0} outside the open unit interval")]
    OutOfRange(f64),
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures caused by malformed input rather than numerics.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::Parse(_) | Error::Io(_) | Error::Csv(_) | Error::Json(_) | Error::InvalidArgument(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
