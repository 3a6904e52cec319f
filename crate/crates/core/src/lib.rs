//! Toolkit for transparent, reusable and updatable computational
//! health-economic models.
//!
//! Every public operation is labelled with one of fifteen command verbs
//! (see [`modules::Verb`]). The library is organised by concern:
//!
//! * [`modules`]: the module template (descriptors, inheritance, verb dispatch).
//! * [`data`]: ingest, dictionary validation, description, synthetic data.
//! * [`scoring`]: multi-attribute instrument scoring engines.
//! * [`mapping`]: utility mapping models, cross-validation, catalogues.
//! * [`predict`]: out-of-sample utility prediction and QALYs.
//! * [`report`]: report templates and replication manifests.
//! * [`registry`]: versioned artifact registry with search.

pub mod data;
pub mod error;
pub mod hash;
pub mod json;
pub mod mapping;
pub mod modules;
pub mod predict;
pub mod registry;
pub mod report;
pub mod scoring;

pub use data::{
    describe_dataset, ingest_table, load_dictionary, synthesize_dataset, validate_dataset,
    DataDictionary, DatasetMetadata, DescriptiveSummary, RawTable, Stratify, ValidatedDataset,
};
pub use error::{Error, Result};
pub use mapping::{
    build_catalogue, compute_metrics, correlation_matrix, cross_validate, fit_glm_irls,
    fit_lmm_random_intercept, fit_ols, fit_transformed_ols, specify_candidates, CandidateSpec,
    FittedModel, ModelCatalogue, ModelFamily, ModelKind, PerformanceRecord,
};
pub use modules::{define_module, inherit_module, renew, ModuleDescriptor, ModuleInstance, Verb};
pub use predict::{check_compatibility, compute_qalys, predict_utility, PredictionRequest, QalyRecord};
pub use registry::{HttpRegistry, LocalRegistry, Registry, RegistryEntry, RegistryIndex};
pub use report::{build_manifest, render_template, run_manifest, PipelineManifest, ReportTemplate, RunRecord};
pub use scoring::{
    attach_instrument, score_additive, score_dataset, score_multiplicative, InstrumentDefinition,
    ScoredDataset,
};

/// Version string stamped into catalogues, manifests and run records.
pub const TOOLKIT_VERSION: &str = env!("CARGO_PKG_VERSION");
