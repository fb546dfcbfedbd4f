use thiserror::Error;

/// Errors produced by the simulator and its numerical kernels.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("dimension {0} is too small (need at least 2)")]
    DimensionTooSmall(usize),

    #[error("shape mismatch: expected {expected}x{expected}, got {found}x{found}")]
    ShapeMismatch { expected: usize, found: usize },

    #[error("matrix is not Hermitian (deviation {deviation:e} > {tol:e})")]
    NotHermitian { deviation: f64, tol: f64 },

    #[error("matrix is not positive semidefinite (min eigenvalue {min_eigenvalue:e} < -{tol:e})")]
    NotPsd { min_eigenvalue: f64, tol: f64 },

    #[error("trace is {trace} (expected 1 within {tol:e})")]
    BadTrace { trace: f64, tol: f64 },

    #[error("matrix contains non-finite entries")]
    NonFinite,

    #[error("matrix too far from the density-matrix domain: {reason}")]
    TooFarFromDomain { reason: String },

    #[error("jump has zero probability (normalizer {norm:e})")]
    ZeroProbabilityJump { norm: f64 },

    #[error("degenerate Kraus normalization {value:e}{}", step.map(|s| format!(" at step {s}")).unwrap_or_default())]
    DegenerateNormalization { step: Option<usize>, value: f64 },

    #[error("jump probability {prob} per step exceeds {max} (alpha = {alpha}, dt = {dt:e}); use dt <= {suggested_dt:e}")]
    RateOverflow {
        alpha: f64,
        dt: f64,
        prob: f64,
        max: f64,
        suggested_dt: f64,
    },

    #[error("Kraus normalizer is singular (min eigenvalue {min_eigenvalue:e})")]
    SingularNormalizer { min_eigenvalue: f64 },

    #[error("Kraus set violates completeness (defect {defect:e})")]
    IncompleteKrausSet { defect: f64 },

    #[error("outcome {outcome} has degenerate normalizer {norm:e}")]
    DegenerateOutcome { outcome: usize, norm: f64 },

    #[error("expected exactly {expected} measured channel(s), found {found}")]
    ChannelCount { expected: usize, found: usize },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("{aborted} of {n_traj} trajectories aborted; first failure: {first}")]
    TooManyAborted {
        aborted: usize,
        n_traj: usize,
        first: Box<Error>,
    },

    #[error("invalid configuration: {0}")]
    Validation(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("I/O error: {0}")]
    Io(String),
}

impl Error {
    /// Short machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::NotSquare { .. } => "NotSquare",
            Error::DimensionTooSmall(_) => "DimensionTooSmall",
            Error::ShapeMismatch { .. } => "ShapeMismatch",
            Error::NotHermitian { .. } => "NotHermitian",
            Error::NotPsd { .. } => "NotPSD",
            Error::BadTrace { .. } => "BadTrace",
            Error::NonFinite => "NonFinite",
            Error::TooFarFromDomain { .. } => "TooFarFromDomain",
            Error::ZeroProbabilityJump { .. } => "ZeroProbabilityJump",
            Error::DegenerateNormalization { .. } => "DegenerateNormalization",
            Error::RateOverflow { .. } => "RateOverflow",
            Error::SingularNormalizer { .. } => "SingularNormalizer",
            Error::IncompleteKrausSet { .. } => "IncompleteKrausSet",
            Error::DegenerateOutcome { .. } => "DegenerateOutcome",
            Error::ChannelCount { .. } => "ChannelCount",
            Error::InsufficientData(_) => "InsufficientData",
            Error::TooManyAborted { first, .. } => first.kind(),
            Error::Validation(_) => "ValidationError",
            Error::Parse(_) => "ParseError",
            Error::Io(_) => "IoError",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
