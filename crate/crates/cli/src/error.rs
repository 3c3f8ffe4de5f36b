use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] ckdr::Error),
    #[error("response column `{0}` not found in header")]
    MissingResponse(String),
    #[error("negative count {value} in row {row}, column `{column}`")]
    NegativeCount { row: usize, column: String, value: f64 },
    #[error("response label `{label}` in row {row} has no mapping to -1 or +1")]
    UnmappableLabel { row: usize, label: String },
    #[error("row {0} sums to zero after filtering")]
    RowSumZero(usize),
    #[error("at least 3 feature columns are required, found {0}")]
    TooFewFeatures(usize),
    #[error("row {row}, column `{column}`: cannot parse `{text}` as a number")]
    NotNumeric { row: usize, column: String, text: String },
    #[error("{0}")]
    Csv(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn code(&self) -> &'static str {
        match self {
            CliError::Core(e) => e.code(),
            CliError::MissingResponse(_) => "MissingResponse",
            CliError::NegativeCount { .. } => "NegativeCount",
            CliError::UnmappableLabel { .. } => "UnmappableLabel",
            CliError::RowSumZero(_) => "RowSumZero",
            CliError::TooFewFeatures(_) => "TooFewFeatures",
            CliError::NotNumeric { .. } => "NotNumeric",
            CliError::Csv(_) => "Csv",
            CliError::Io { .. } => "Io",
            CliError::Usage(_) => "Usage",
        }
    }

    pub(crate) fn io(path: &std::path::Path, err: impl std::fmt::Display) -> Self {
        CliError::Io { path: path.display().to_string(), message: err.to_string() }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Csv(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
