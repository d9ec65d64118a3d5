use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("intractable enumeration: {n} units exceeds the limit of {limit}")]
    Intractable { n: usize, limit: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("gate {label:?} is not unitary (deviation {deviation:.3e})")]
    NonUnitary { label: String, deviation: f64 },

    #[error("unknown gate label {0:?}")]
    UnknownGate(String),

    #[error("sample {0} has no measurement basis")]
    MissingBasis(usize),

    #[error("invalid region: {0}")]
    InvalidRegion(String),

    #[error("swap estimator collapsed: mean swap value {0} is not positive")]
    EstimatorCollapsed(f64),

    #[error("state is not normalized: squared norm {0}")]
    Unnormalized(f64),

    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("checkpoint {}: {message}", path.display())]
    Checkpoint { path: PathBuf, message: String },
}

impl Error {
    /// Short machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::Intractable { .. } => "intractable",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::NonUnitary { .. } => "non_unitary",
            Error::UnknownGate(_) => "unknown_gate",
            Error::MissingBasis(_) => "missing_basis",
            Error::InvalidRegion(_) => "invalid_region",
            Error::EstimatorCollapsed(_) => "estimator_collapsed",
            Error::Unnormalized(_) => "unnormalized",
            Error::Parse { .. } => "parse",
            Error::Io { .. } => "io",
            Error::Checkpoint { .. } => "checkpoint",
        }
    }

    pub(crate) fn dims(what: &'static str, expected: usize, found: usize) -> Self {
        Error::DimensionMismatch {
            what,
            expected,
            found,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}

pub(crate) fn check_len(what: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::dims(what, expected, found))
    }
}
