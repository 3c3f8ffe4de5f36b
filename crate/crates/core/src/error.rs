use thiserror::Error;

/// Errors raised by the reduction, kernel, fitting and evaluation routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("entry {index} is negative ({value})")]
    NegativeEntry { index: usize, value: f64 },

    #[error("entries sum to {sum}, not 1")]
    NotNormalized { sum: f64 },

    #[error("vector sums to {sum}; cannot normalize")]
    ZeroVector { sum: f64 },

    #[error("input contains a non-finite value")]
    NonFiniteInput,

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("the all-ones vector is not in the span of the basis (residual {residual:e})")]
    OneVectorNotInSpan { residual: f64 },

    #[error("basis is degenerate: {0}")]
    DegenerateBasis(String),

    #[error("kernel bandwidth must be positive, got {0}")]
    NonPositiveBandwidth(f64),

    #[error("gram matrix is already centered")]
    AlreadyCentered,

    #[error("all points are identical; the median distance is zero")]
    AllPointsIdentical,

    #[error("linear solve failed: {0}")]
    SolveFailure(String),

    #[error("too few samples: {0}")]
    TooFewSamples(String),

    #[error("operation requires a linear response kernel with real responses")]
    WrongResponseKernel,

    #[error("subspace has dimension zero")]
    ZeroDimensionalSubspace,

    #[error("label vectors differ in length: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("k = {k} exceeds the number of points {d}")]
    KTooLarge { k: usize, d: usize },

    #[error("dimension {0} is too small for three amalgamation blocks")]
    DimensionTooSmall(usize),

    #[error("coefficient vector is constant")]
    ConstantBeta,

    #[error("empty input")]
    EmptyInput,

    #[error("target dimension must be {expected}, got {found}")]
    WrongTargetDimension { expected: usize, found: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("unsupported document version {0}")]
    UnsupportedVersion(u64),

    #[error("malformed document: {0}")]
    Format(String),

    #[error("internal consistency check failed: {0}")]
    Internal(String),
}

impl Error {
    /// Stable, machine-readable identifier used by the command line.
    pub fn code(&self) -> &'static str {
        match self {
            Error::NegativeEntry { .. } => "NegativeEntry",
            Error::NotNormalized { .. } => "NotNormalized",
            Error::ZeroVector { .. } => "ZeroVector",
            Error::NonFiniteInput => "NonFiniteInput",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::InvalidPartition(_) => "InvalidPartition",
            Error::OneVectorNotInSpan { .. } => "OneVectorNotInSpan",
            Error::DegenerateBasis(_) => "DegenerateBasis",
            Error::NonPositiveBandwidth(_) => "NonPositiveBandwidth",
            Error::AlreadyCentered => "AlreadyCentered",
            Error::AllPointsIdentical => "AllPointsIdentical",
            Error::SolveFailure(_) => "SolveFailure",
            Error::TooFewSamples(_) => "TooFewSamples",
            Error::WrongResponseKernel => "WrongResponseKernel",
            Error::ZeroDimensionalSubspace => "ZeroDimensionalSubspace",
            Error::LengthMismatch(..) => "LengthMismatch",
            Error::KTooLarge { .. } => "KTooLarge",
            Error::DimensionTooSmall(_) => "DimensionTooSmall",
            Error::ConstantBeta => "ConstantBeta",
            Error::EmptyInput => "EmptyInput",
            Error::WrongTargetDimension { .. } => "WrongTargetDimension",
            Error::InvalidConfig(_) => "InvalidConfig",
            Error::UnsupportedVersion(_) => "UnsupportedVersion",
            Error::Format(_) => "Format",
            Error::Internal(_) => "Internal",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
