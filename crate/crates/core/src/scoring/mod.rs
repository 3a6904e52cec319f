//! Multi-attribute instrument scoring.
//!
//! Instruments are described by parameter files ([`InstrumentDefinition`]).
//! Two engines are built in: an additive decrement model (value-set style,
//! `1 - sum of level decrements`) and a multiplicative domain model
//! (item disutilities combined within domains, domains combined
//! multiplicatively). Custom engines can be plugged in through
//! [`CustomScorer`]; they are checked at runtime against the anchor and
//! bounds laws.

mod dataset;
mod engines;
mod instrument;

pub use dataset::{attach_instrument, attach_instrument_with, score_dataset, InstrumentBinding, ScoredDataset, TOTAL_UNWEIGHTED, TOTAL_UTILITY};
pub use engines::{score_additive, score_multiplicative, AdditiveParams, MultiplicativeParams};
pub use instrument::{CustomScorer, Domain, Engine, FnScorer, InstrumentDefinition, Item};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScoringError {
    #[error("instrument definition: {0}")]
    Definition(String),
    #[error("item {item}: level {level} outside [1, {levels}]")]
    Level { item: String, level: i64, levels: u32 },
    #[error("state has {got} items, instrument has {expected}")]
    StateLength { expected: usize, got: usize },
    #[error("item {item}: column '{variable}' not found")]
    MissingColumn { item: String, variable: String },
    #[error("item {item}: column '{variable}' is {class}, expected integer")]
    ColumnClass { item: String, variable: String, class: String },
    #[error("item {item}: range {range} of column '{variable}' exceeds item levels {levels} (permitted [1, {levels}])")]
    RangeMismatch { item: String, variable: String, range: String, levels: u32 },
    #[error("custom scorer '{name}' violates the {law} law: {detail}")]
    CustomContract { name: String, law: &'static str, detail: String },
    #[error("custom scorer '{0}' is not registered")]
    UnknownCustom(String),
}
