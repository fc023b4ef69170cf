use thiserror::Error;

/// Error type shared by every module of the library.
///
/// All functions are total on their documented domains; domain violations
/// surface as typed errors here, never as silent NaN.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument fell outside the documented domain of an operation.
    #[error("domain error in {op}: {msg}")]
    Domain { op: &'static str, msg: String },

    /// Vector lengths disagree (data vs. diagonal, signal vs. model, ...).
    #[error("dimension mismatch: {msg}")]
    DimensionMismatch { msg: String },

    /// The known noise level must be strictly positive.
    #[error("noise level sigma must be positive, got {0}")]
    NonPositiveSigma(f64),

    /// The median of the squared normalized observations is zero, so the
    /// dyadic threshold (the smallest power of two capturing half the mass)
    /// does not exist.
    #[error("degenerate sample: the median squared normalized observation is zero")]
    DegenerateSample,

    /// A noise estimate came back as the +infinity sentinel where a finite
    /// value is required.
    #[error("noise estimate is the +infinity sentinel; cannot proceed")]
    SentinelNoise,

    /// The eta-quantile norm estimator is defined only in the sparse regime.
    #[error(
        "the eta-variant estimator is defined only in the sparse regime \
         (s <= frob); got s = {s}, frob = {frob}"
    )]
    DenseRegimeEta { s: usize, frob: f64 },

    /// Covariance family parameters out of range (gamma, rho, block geometry, weights).
    #[error("invalid covariance parameter: {0}")]
    InvalidCovariance(String),

    /// An explicit covariance matrix is materially non-PSD.
    #[error(
        "covariance matrix is not positive semidefinite: eigenvalue {eigenvalue:e} \
         is below the tolerance {tol:e}"
    )]
    NotPsd { eigenvalue: f64, tol: f64 },

    /// Experiment or estimator configuration rejected before any computation.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// Config file is syntactically malformed (unparsable line, bad number).
    #[error("config syntax error: {0}")]
    ConfigSyntax(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(op: &'static str, msg: impl Into<String>) -> Self {
        Error::Domain {
            op,
            msg: msg.into(),
        }
    }

    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::DimensionMismatch { msg: msg.into() }
    }
}
