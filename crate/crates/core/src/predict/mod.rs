//! Out-of-sample utility prediction from fitted mapping models and
//! conversion of paired utilities into QALYs.

mod compat;
mod qaly;
mod utility;

pub use compat::{check_compatibility, default_variable_map, CompatibilityReport};
pub use qaly::{compute_qalys, qaly, qaly_csv, QalyRecord, QalyResult, QalySpec, DAYS_PER_YEAR};
pub use utility::{predict_utility, Predictions, PredictionRequest};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PredictError {
    #[error("model is incompatible with the data: {0}")]
    Incompatible(CompatibilityReport),
    #[error("uid {uid}: end time {t_end} is not after start time {t_start}")]
    TimeOrder { uid: String, t_start: f64, t_end: f64 },
    #[error("{0}")]
    Spec(String),
}
