//! Utility mapping: models that predict health utility from psychological
//! and functional measures, their cross-validated performance, and
//! record-free catalogues for sharing them.

mod catalogue;
mod correlation;
mod cv;
mod design;
mod glm;
mod lmm;
mod metrics;
mod model;
mod ols;
mod spec;
mod transform;

pub use catalogue::{build_catalogue, CatalogueEntry, CatalogueMeta, ModelCatalogue};
pub use correlation::{correlation_matrix, pearson, CorrelationMatrix};
pub use cv::{assign_cluster_folds, assign_folds, cross_validate, evaluate_candidates, performance_csv, select_best, FoldMetrics, PerformanceRecord};
pub use design::{complete_rows, Design, DesignSpec};
pub(crate) use design::term_values;
pub use glm::{fit_glm_irls, log_likelihood, score_vector, GlmFamily};
pub use lmm::{fit_lmm_random_intercept, lmm_log_likelihood};
pub use metrics::{compute_metrics, Metrics};
pub use model::{FittedModel, ModelFamily, ModelKind, RowDiagnostics, Term, TermSource, Transform};
#[cfg(test)]
pub(crate) use model::default_terms_model;
pub use ols::fit_ols;
pub use spec::{specify_candidates, CandidateSpec};
pub use transform::{fit_transformed_ols, DEFAULT_EPSILON};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MappingError {
    #[error("design matrix is rank deficient: column '{0}' is collinear with earlier columns")]
    RankDeficient(String),
    #[error("need more rows than coefficients: n = {n}, p = {p}")]
    TooFewRows { n: usize, p: usize },
    #[error("row {0}: response must be positive under log link")]
    NonPositiveResponse(usize),
    #[error("row {row}: response {value} outside [0, 1]")]
    ResponseRange { row: usize, value: f64 },
    #[error("epsilon {0} outside (0, 0.01]")]
    Epsilon(f64),
    #[error("only one cluster present; a random intercept is not identifiable, use fit_ols instead")]
    SingleCluster,
    #[error("invalid model family: {0}")]
    Family(String),
    #[error("{0}")]
    Spec(String),
    #[error("target cannot be a predictor")]
    TargetAsPredictor,
    #[error("unknown variable '{0}'")]
    UnknownVariable(String),
    #[error("{0}")]
    Metrics(String),
    #[error("cross-validation needs n >= 2k rows: n = {n}, k = {k}")]
    NotEnoughRows { n: usize, k: usize },
    #[error("record-free invariant violated: {0}")]
    RecordFree(String),
    #[error("catalogue: {0}")]
    Catalogue(String),
    #[error("{family} with predictor {predictor}, fold {fold}: {source}")]
    Fold { family: String, predictor: String, fold: usize, source: Box<MappingError> },
}
