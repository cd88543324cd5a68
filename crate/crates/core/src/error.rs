use thiserror::Error;

/// Everything that can go wrong while building kernels, sampling posteriors
/// or reading datasets.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum BkrError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("size mismatch: {what} has size {found}, expected {expected}")]
    SizeMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("lengthscale must be positive and finite, got {0}")]
    InvalidLengthscale(f64),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("all points are identical; no positive pairwise distance exists")]
    NoPositiveDistance,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate kernel for variable `{variable}`: self-HSIC {value:e} is below {floor:e}")]
    DegenerateKernel {
        variable: String,
        value: f64,
        floor: f64,
    },

    #[error("degenerate exchangeability correction: mean tau {0} is not below 1")]
    DegenerateTau(f64),

    #[error("oracle size guard exceeded: n = {n} > {limit}")]
    GuardExceeded { n: usize, limit: usize },

    #[error("dataset has incomplete rows in column `{0}`; joint analysis needs complete cases")]
    IncompleteRows(String),

    #[error("pairs were not computed with shared posterior weights")]
    UnsharedStreams,

    #[error("schema mismatch: {0}")]
    Schema(String),

    #[error("cannot parse cell at row {row}, column `{column}`: {reason}")]
    Parse {
        row: usize,
        column: String,
        reason: String,
    },

    #[error("ragged vector at row {row}, column `{column}`: expected {expected} components, found {found}")]
    RaggedVector {
        row: usize,
        column: String,
        expected: usize,
        found: usize,
    },

    #[error("unknown column `{0}`")]
    UnknownColumn(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl BkrError {
    /// Whether this error stems from numerically degenerate input rather
    /// than malformed data or arguments.
    pub fn is_numeric_degeneracy(&self) -> bool {
        matches!(
            self,
            BkrError::DegenerateKernel { .. }
                | BkrError::DegenerateTau(_)
                | BkrError::NoPositiveDistance
        )
    }

    /// Whether this error was caused by the contents of an input dataset.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            BkrError::Schema(_)
                | BkrError::Parse { .. }
                | BkrError::RaggedVector { .. }
                | BkrError::UnknownColumn(_)
                | BkrError::IncompleteRows(_)
                | BkrError::NonFinite(_)
                | BkrError::Io(_)
        )
    }
}

impl From<std::io::Error> for BkrError {
    fn from(e: std::io::Error) -> Self {
        BkrError::Io(e.to_string())
    }
}

impl From<csv::Error> for BkrError {
    fn from(e: csv::Error) -> Self {
        BkrError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for BkrError {
    fn from(e: serde_json::Error) -> Self {
        BkrError::Schema(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, BkrError>;
