use thiserror::Error as ThisError;

use crate::data::{DataError, ValidationFailure};
use crate::mapping::MappingError;
use crate::modules::ModuleError;
use crate::predict::PredictError;
use crate::registry::RegistryError;
use crate::report::ReportError;
use crate::scoring::ScoringError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Crate-wide error. Each variant wraps the error type of one module.
#[derive(Debug, ThisError)]
pub enum Error {
    #[error(transparent)]
    Module(#[from] ModuleError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Validation(#[from] ValidationFailure),
    #[error(transparent)]
    Scoring(#[from] ScoringError),
    #[error(transparent)]
    Mapping(#[from] MappingError),
    #[error(transparent)]
    Predict(#[from] PredictError),
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error(transparent)]
    Registry(#[from] RegistryError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True when this error (or the pipeline step failure it wraps) is a
    /// dictionary validation failure. Callers use this to select the
    /// halting exit status.
    pub fn is_validation_failure(&self) -> bool {
        match self {
            Error::Validation(_) => true,
            Error::Report(ReportError::StepFailed { source, .. }) => source.is_validation_failure(),
            _ => false,
        }
    }
}
