use serde::{Deserialize, Serialize};

use super::model::{ModelFamily, ModelKind};
use super::transform::DEFAULT_EPSILON;
use super::MappingError;
use crate::data::{Column, ValidatedDataset};

/// What to fit and how to evaluate it. Each family is paired with each
/// single predictor, always alongside every covariate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSpec {
    pub target: String,
    pub predictors: Vec<String>,
    pub covariates: Vec<String>,
    pub families: Vec<ModelFamily>,
    pub folds: usize,
    pub seed: u64,
    /// Grouping column for the random intercept; folds keep clusters whole.
    pub cluster_var: String,
    pub epsilon: f64,
}

impl CandidateSpec {
    pub fn combinations(&self) -> impl Iterator<Item = (ModelFamily, &str)> {
        self.families.iter().flat_map(move |f| self.predictors.iter().map(move |p| (*f, p.as_str())))
    }
}

/// Checks a candidate specification against a (scored) dataset. An empty
/// family list means all families.
#[allow(clippy::too_many_arguments)]
pub fn specify_candidates(
    ds: &ValidatedDataset,
    target: &str,
    predictors: &[&str],
    covariates: &[&str],
    families: &[ModelKind],
    folds: usize,
    seed: u64,
) -> Result<CandidateSpec, MappingError> {
    let col = |v: &str| ds.column(v).ok_or_else(|| MappingError::UnknownVariable(v.to_string()));
    if !col(target)?.class().is_numeric() {
        return Err(MappingError::Spec(format!("target '{target}' must be numeric")));
    }
    if predictors.is_empty() {
        return Err(MappingError::Spec("at least one predictor is required".into()));
    }
    if predictors.contains(&target) || covariates.contains(&target) {
        return Err(MappingError::TargetAsPredictor);
    }
    for p in predictors {
        let c = col(p)?;
        if !c.class().is_numeric() {
            return Err(MappingError::Spec(format!("predictor '{p}' is {}, expected numeric", c.class())));
        }
        if covariates.contains(p) {
            return Err(MappingError::Spec(format!("'{p}' is listed as both predictor and covariate")));
        }
    }
    for c in covariates {
        let column = col(c)?;
        if !(column.class().is_numeric() || matches!(column, Column::Categorical(_))) {
            return Err(MappingError::Spec(format!("covariate '{c}' is {}, expected numeric or categorical", column.class())));
        }
    }
    if folds < 2 {
        return Err(MappingError::Spec(format!("need at least 2 folds, got {folds}")));
    }
    let kinds: Vec<ModelKind> = if families.is_empty() { ModelKind::ALL.to_vec() } else { families.to_vec() };
    Ok(CandidateSpec {
        target: target.into(),
        predictors: predictors.iter().map(|s| s.to_string()).collect(),
        covariates: covariates.iter().map(|s| s.to_string()).collect(),
        families: kinds.into_iter().map(ModelFamily::new).collect(),
        folds,
        seed,
        cluster_var: ds.metadata().uid_var.clone(),
        epsilon: DEFAULT_EPSILON,
    })
}
