//! Person-level records: ingest, dictionary-driven validation, description
//! and synthetic ("toy") data generation.

mod describe;
mod dictionary;
mod synth;
mod table;
mod validate;

pub use describe::{describe_dataset, DescriptiveSummary, Histogram, NumericStats, Stratify, StratumSummary, VariableSummary};
pub use dictionary::{load_dictionary, DataDictionary, DictionaryEntry, VarClass};
pub use synth::synthesize_dataset;
pub(crate) use synth::seeded_permutation;
pub use table::{ingest_table, RawTable, DEFAULT_MISSING_MARKER};
pub use validate::{validate_dataset, Column, DatasetMetadata, ValidatedDataset, ValidationFailure};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DataError {
    #[error("dictionary line {line}: {message}")]
    DictionaryRow { line: u64, message: String },
    #[error("{variable}: min {min} > max {max}")]
    DictionaryRange { variable: String, min: f64, max: f64 },
    #[error("line {line}: expected {expected} fields, got {got}")]
    Ragged { line: u64, expected: usize, got: usize },
    #[error("csv error: {0}")]
    Csv(String),
    #[error("cannot stratify: {0}")]
    Stratify(String),
    #[error("cannot synthesize: {0}")]
    Synthesis(String),
    #[error("dataset file: {0}")]
    Format(String),
}
