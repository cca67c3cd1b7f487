use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Broad failure category, used to pick a process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Input,
    Statistical,
    Io,
}

impl ErrorCategory {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorCategory::Input => 2,
            ErrorCategory::Statistical => 3,
            ErrorCategory::Io => 4,
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed GeoJSON: {0}")]
    Json(String),
    #[error("feature {feature} has no \"{property}\" property")]
    MissingRegionId { feature: usize, property: String },
    #[error("duplicate region id \"{0}\"")]
    DuplicateRegionId(String),
    #[error("region \"{0}\" has non-areal geometry")]
    NonArealGeometry(String),
    #[error("region \"{region}\": invalid ring ({reason})")]
    InvalidRing { region: String, reason: String },

    #[error("malformed CSV: {0}")]
    Csv(String),
    #[error("missing column \"{0}\"")]
    MissingColumn(String),
    #[error("unknown region \"{0}\"")]
    UnknownRegion(String),
    #[error("non-numeric value \"{value}\" at row {row}, column {column}")]
    NonNumericValue { row: usize, column: String, value: String },
    #[error("non-finite value at row {row}, column {column}")]
    NonFiniteValue { row: usize, column: String },
    #[error("duplicate point id \"{0}\"")]
    DuplicatePointId(String),
    #[error("point \"{0}\" has coordinates out of range")]
    CoordinateOutOfRange(String),

    #[error("self edge at index {0}")]
    SelfEdge(usize),
    #[error("index {index} out of range for {n} regions")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("malformed weights file: {0}")]
    WeightsFormat(String),
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("cannot impute regions {0:?}: no path to an observed value")]
    Unimputable(Vec<usize>),
    #[error("missing value at region index {0}; impute before computing statistics")]
    MissingValue(usize),
    #[error("zero variance")]
    ZeroVariance,
    #[error("too few regions ({0}) for the statistic")]
    TooFewRegions(usize),
    #[error("{0} arrangements exceed the exhaustive enumeration limit; use Monte Carlo permutations")]
    EnumerationTooLarge(u128),
    #[error("invalid permutation count {0} (minimum 99)")]
    InvalidPermutations(usize),
    #[error("empty input")]
    EmptyInput,

    #[error("missing feature \"{0}\"")]
    MissingFeature(String),
    #[error("weights sum to {0}, expected 1")]
    WeightSumViolation(f64),
    #[error("invalid weight {weight} for feature \"{feature}\"")]
    InvalidWeight { feature: String, weight: f64 },
    #[error("duplicate feature \"{0}\"")]
    DuplicateFeature(String),
    #[error("empty subset")]
    EmptySubset,
    #[error("k must be at least 1")]
    InvalidK,
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Io { .. } => ErrorCategory::Io,
            Error::ZeroVariance
            | Error::TooFewRegions(_)
            | Error::Unimputable(_)
            | Error::EnumerationTooLarge(_) => ErrorCategory::Statistical,
            Error::Context { source, .. } => source.category(),
            _ => ErrorCategory::Input,
        }
    }

    pub fn exit_code(&self) -> i32 {
        self.category().exit_code()
    }

    /// Innermost error, skipping context wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Context { source, .. } => source.root(),
            e => e,
        }
    }

    pub fn context(self, context: impl Into<String>) -> Error {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Error {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub trait ResultExt<T> {
    fn context(self, context: impl FnOnce() -> String) -> Result<T>;
}

impl<T> ResultExt<T> for Result<T> {
    fn context(self, context: impl FnOnce() -> String) -> Result<T> {
        self.map_err(|e| e.context(context()))
    }
}
