use thiserror::Error;

/// Errors raised by the fusion engine.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum FusionError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("duplicate observation for object `{object}` from source `{source_id}`")]
    DuplicateObservation { object: String, source_id: String },

    #[error("object `{0}` has no observations")]
    EmptyObject(String),

    #[error("label `{value}` for object `{object}` was not reported by any source")]
    LabelOutsideDomain { object: String, value: String },

    #[error("unknown object `{0}`")]
    UnknownObject(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("value out of domain: {0}")]
    Domain(String),

    #[error("agreement indistinguishable from chance")]
    ChanceAgreement,

    #[error("{file}:{line}: {message}")]
    Parse {
        file: String,
        line: u64,
        message: String,
    },

    #[error("csv: {0}")]
    Csv(String),

    #[error("io: {0}")]
    Io(String),
}

impl From<csv::Error> for FusionError {
    fn from(e: csv::Error) -> Self {
        FusionError::Csv(e.to_string())
    }
}

impl From<std::io::Error> for FusionError {
    fn from(e: std::io::Error) -> Self {
        FusionError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, FusionError>;
