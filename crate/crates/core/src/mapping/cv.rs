use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::catalogue::CatalogueEntry;
use super::design::{complete_rows, response, Design, DesignSpec};
use super::glm::{fit_glm_irls, GlmFamily};
use super::lmm::fit_lmm_random_intercept;
use super::metrics::{compute_metrics, Metrics};
use super::model::{FittedModel, ModelFamily, ModelKind, Transform};
use super::ols::fit_ols;
use super::spec::CandidateSpec;
use super::transform::fit_transformed_ols;
use super::MappingError;
use crate::data::seeded_permutation;
use crate::data::ValidatedDataset;
use crate::json::format_f64;

/// Fold of each row: a seeded permutation dealt round-robin, so fold sizes
/// differ by at most one.
pub fn assign_folds(n: usize, k: usize, seed: u64) -> Vec<usize> {
    let mut folds = vec![0; n];
    for (pos, row) in seeded_permutation(n, seed).into_iter().enumerate() {
        folds[row] = pos % k;
    }
    folds
}

/// Like [`assign_folds`] but over clusters; all rows of a cluster share a fold.
pub fn assign_cluster_folds(clusters: &[String], k: usize, seed: u64) -> Result<Vec<usize>, MappingError> {
    let mut ids: Vec<&str> = clusters.iter().map(String::as_str).collect();
    ids.sort_unstable();
    ids.dedup();
    if ids.len() < k {
        return Err(MappingError::Spec(format!("{} clusters cannot fill {k} folds", ids.len())));
    }
    let fold_of: BTreeMap<&str, usize> = assign_folds(ids.len(), k, seed).into_iter().enumerate().map(|(i, f)| (ids[i], f)).collect();
    Ok(clusters.iter().map(|c| fold_of[c.as_str()]).collect())
}

/// Per-fold metric vectors, indexed by fold.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FoldMetrics {
    pub r2: Vec<Option<f64>>,
    pub rmse: Vec<f64>,
    pub mae: Vec<f64>,
}

impl FoldMetrics {
    fn push(&mut self, m: Metrics) {
        self.r2.push(m.r2);
        self.rmse.push(m.rmse);
        self.mae.push(m.mae);
    }

    pub fn len(&self) -> usize {
        self.rmse.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rmse.is_empty()
    }

    /// Fold means; `r2` is `None` if any fold's R2 is undefined.
    pub fn mean(&self) -> Metrics {
        let k = self.len() as f64;
        Metrics {
            r2: self.r2.iter().copied().collect::<Option<Vec<f64>>>().map(|v| v.iter().sum::<f64>() / k),
            rmse: self.rmse.iter().sum::<f64>() / k,
            mae: self.mae.iter().sum::<f64>() / k,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerformanceRecord {
    pub family: ModelKind,
    pub predictors: Vec<String>,
    pub covariates: Vec<String>,
    /// Fold means; `r2` is `None` if any fold's R2 is undefined.
    pub cv: Metrics,
    pub in_sample: Metrics,
    pub folds: FoldMetrics,
}

pub(crate) fn fit_family(
    family: ModelFamily,
    y: &[f64],
    design: &Design,
    clusters: &[String],
    epsilon: f64,
) -> Result<FittedModel, MappingError> {
    let mut m = match family.kind {
        ModelKind::Ols => fit_ols(y, design)?,
        ModelKind::GlmGaussianLog => fit_glm_irls(y, design, GlmFamily::GaussianLog, family.max_iter, family.tol)?,
        ModelKind::GlmGammaLog => fit_glm_irls(y, design, GlmFamily::GammaLog, family.max_iter, family.tol)?,
        ModelKind::OlsLogitTransform => fit_transformed_ols(y, design, Transform::Logit, epsilon)?,
        ModelKind::OlsCloglogTransform => fit_transformed_ols(y, design, Transform::Cloglog, epsilon)?,
        ModelKind::LmmRandomIntercept => fit_lmm_random_intercept(y, design, clusters, family.max_iter, family.tol)?,
    };
    m.family = family;
    Ok(m)
}

fn evaluate_one(ds: &ValidatedDataset, spec: &CandidateSpec, family: ModelFamily, predictor: &str) -> Result<CatalogueEntry, MappingError> {
    let mut vars: Vec<&str> = vec![spec.target.as_str(), predictor];
    vars.extend(spec.covariates.iter().map(String::as_str));
    let lmm = family.kind == ModelKind::LmmRandomIntercept;
    if lmm {
        vars.push(&spec.cluster_var);
    }
    let rows = complete_rows(ds, &vars)?;
    let n = rows.len();
    if n < 2 * spec.folds {
        return Err(MappingError::NotEnoughRows { n, k: spec.folds });
    }
    let mut terms_vars = vec![predictor.to_string()];
    terms_vars.extend(spec.covariates.iter().cloned());
    let design = DesignSpec::from_dataset(ds, &terms_vars, &rows)?.build(ds, &rows)?;
    let y = response(ds, &spec.target, &rows)?;
    let clusters: Vec<String> = if lmm {
        let ids = ds.text(&spec.cluster_var).ok_or_else(|| MappingError::UnknownVariable(spec.cluster_var.clone()))?;
        rows.iter().map(|&i| ids[i].clone().expect("complete row")).collect()
    } else {
        vec![]
    };
    let fold_of = if lmm { assign_cluster_folds(&clusters, spec.folds, spec.seed)? } else { assign_folds(n, spec.folds, spec.seed) };

    let mut folds = FoldMetrics::default();
    for k in 0..spec.folds {
        let wrap = |e: MappingError| MappingError::Fold {
            family: family.kind.to_string(),
            predictor: predictor.to_string(),
            fold: k + 1,
            source: Box::new(e),
        };
        let train: Vec<usize> = (0..n).filter(|&i| fold_of[i] != k).collect();
        let test: Vec<usize> = (0..n).filter(|&i| fold_of[i] == k).collect();
        let pick = |idx: &[usize], v: &[f64]| idx.iter().map(|&i| v[i]).collect::<Vec<f64>>();
        let train_clusters: Vec<String> = if lmm { train.iter().map(|&i| clusters[i].clone()).collect() } else { vec![] };
        let model = fit_family(family, &pick(&train, &y), &design.rows(&train), &train_clusters, spec.epsilon).map_err(wrap)?;
        let pred: Vec<f64> = test.iter().map(|&i| model.predict_row(&design.row(i))).collect();
        let metrics = compute_metrics(&pick(&test, &y), &pred).map_err(wrap)?;
        folds.push(metrics);
    }

    let model = fit_family(family, &y, &design, &clusters, spec.epsilon)?;
    let fitted = model.diagnostics.as_ref().expect("fresh fit").fitted.clone();
    let in_sample = compute_metrics(&y, &fitted)?;
    let performance = PerformanceRecord {
        family: family.kind,
        predictors: vec![predictor.to_string()],
        covariates: spec.covariates.clone(),
        cv: folds.mean(),
        in_sample,
        folds,
    };
    Ok(CatalogueEntry { model: model.strip(), performance })
}

/// Fits every candidate on all complete rows and by k-fold cross-validation.
/// Results are ordered by cross-validated RMSE, ties by family order.
pub fn evaluate_candidates(ds: &ValidatedDataset, spec: &CandidateSpec) -> Result<Vec<CatalogueEntry>, MappingError> {
    let combos: Vec<(ModelFamily, &str)> = spec.combinations().collect();
    let mut out = combos
        .par_iter()
        .map(|(f, p)| evaluate_one(ds, spec, *f, p))
        .collect::<Result<Vec<_>, _>>()?;
    out.sort_by(|a, b| {
        a.performance
            .cv
            .rmse
            .total_cmp(&b.performance.cv.rmse)
            .then(a.performance.family.cmp(&b.performance.family))
    });
    Ok(out)
}

pub fn cross_validate(ds: &ValidatedDataset, spec: &CandidateSpec) -> Result<Vec<PerformanceRecord>, MappingError> {
    Ok(evaluate_candidates(ds, spec)?.into_iter().map(|e| e.performance).collect())
}

/// The `n` best candidates of an already ranked list.
pub fn select_best(ranked: &[CatalogueEntry], n: usize) -> Vec<CatalogueEntry> {
    ranked.iter().take(n).cloned().collect()
}

/// Performance table, one row per candidate.
pub fn performance_csv(records: &[PerformanceRecord]) -> String {
    let num = |v: Option<f64>| v.map(format_f64).unwrap_or_else(|| "NA".into());
    let mut out = String::from("family,predictors,covariates,r2_cv,rmse_cv,mae_cv,r2_in,rmse_in,mae_in\n");
    for r in records {
        let cells = [
            r.family.to_string(),
            r.predictors.join("+"),
            r.covariates.join("+"),
            num(r.cv.r2),
            num(Some(r.cv.rmse)),
            num(Some(r.cv.mae)),
            num(r.in_sample.r2),
            num(Some(r.in_sample.rmse)),
            num(Some(r.in_sample.mae)),
        ];
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}
