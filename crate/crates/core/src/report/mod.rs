//! Parameterized text reports and deterministic replication manifests.

mod context;
mod manifest;
mod run;
mod template;

pub use context::{catalogue_context, summary_context};
pub use manifest::{build_manifest, PipelineManifest, PipelineStep, RUNNABLE_STEPS};
pub use run::{run_manifest, RunRecord, StepRecord, StepStatus, DEFAULT_CREATED_UTC, RUN_RECORD_FILE};
pub use template::{markdown_table, render_template, RenderContext, RenderValue, ReportTemplate, Rendered};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("template: {0}")]
    Template(String),
    #[error("missing keys: {}", .0.join(", "))]
    MissingKeys(Vec<String>),
    #[error("manifest: {0}")]
    Manifest(String),
    #[error("manifest has a cycle: {0}")]
    Cycle(String),
    #[error("step {step_id}: input '{input}' is neither an existing file nor a step output")]
    DanglingInput { step_id: String, input: String },
    #[error("step {step_id}: {message}")]
    Step { step_id: String, message: String },
    #[error("step {step_id} failed: {source}")]
    StepFailed { step_id: String, source: Box<crate::Error>, record: Box<RunRecord> },
}
