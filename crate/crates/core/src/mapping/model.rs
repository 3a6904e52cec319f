use std::fmt;
use std::str::FromStr;

use indexmap::IndexMap;
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::MappingError;

/// Candidate model families, in their declared (tie-breaking) order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Ols,
    GlmGaussianLog,
    GlmGammaLog,
    OlsLogitTransform,
    OlsCloglogTransform,
    LmmRandomIntercept,
}

impl ModelKind {
    pub const ALL: [ModelKind; 6] = [
        ModelKind::Ols,
        ModelKind::GlmGaussianLog,
        ModelKind::GlmGammaLog,
        ModelKind::OlsLogitTransform,
        ModelKind::OlsCloglogTransform,
        ModelKind::LmmRandomIntercept,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Ols => "ols",
            ModelKind::GlmGaussianLog => "glm_gaussian_log",
            ModelKind::GlmGammaLog => "glm_gamma_log",
            ModelKind::OlsLogitTransform => "ols_logit_transform",
            ModelKind::OlsCloglogTransform => "ols_cloglog_transform",
            ModelKind::LmmRandomIntercept => "lmm_random_intercept",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = MappingError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ModelKind::ALL.into_iter().find(|k| k.as_str() == s).ok_or_else(|| {
            MappingError::Family(format!(
                "unknown family '{s}'; expected one of {}",
                ModelKind::ALL.map(|k| k.as_str()).join(", ")
            ))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelFamily {
    pub kind: ModelKind,
    pub max_iter: usize,
    pub tol: f64,
}

impl ModelFamily {
    pub fn new(kind: ModelKind) -> Self {
        Self { kind, max_iter: 200, tol: 1e-10 }
    }

    pub fn with_limits(kind: ModelKind, max_iter: usize, tol: f64) -> Result<Self, MappingError> {
        if max_iter < 1 {
            return Err(MappingError::Family("max_iter must be at least 1".into()));
        }
        if !(tol > 0.0 && tol.is_finite()) {
            return Err(MappingError::Family(format!("tol must be positive, got {tol}")));
        }
        Ok(Self { kind, max_iter, tol })
    }
}

/// Inverse link or back-transformation applied to the linear predictor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transform {
    Identity,
    Log,
    Logit,
    Cloglog,
}

impl Transform {
    pub fn forward(self, y: f64) -> f64 {
        match self {
            Transform::Identity => y,
            Transform::Log => y.ln(),
            Transform::Logit => (y / (1.0 - y)).ln(),
            Transform::Cloglog => (-(1.0 - y).ln()).ln(),
        }
    }

    pub fn inverse(self, eta: f64) -> f64 {
        match self {
            Transform::Identity => eta,
            Transform::Log => eta.exp(),
            Transform::Logit => 1.0 / (1.0 + (-eta).exp()),
            Transform::Cloglog => 1.0 - (-eta.exp()).exp(),
        }
    }
}

/// Where a design column comes from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum TermSource {
    Intercept,
    Numeric { variable: String },
    /// Indicator of one categorical level (treatment coding).
    Level { variable: String, level: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Term {
    pub name: String,
    #[serde(flatten)]
    pub source: TermSource,
}

impl Term {
    pub fn intercept() -> Self {
        Term { name: "(Intercept)".into(), source: TermSource::Intercept }
    }

    pub fn numeric(variable: &str) -> Self {
        Term { name: variable.into(), source: TermSource::Numeric { variable: variable.into() } }
    }

    pub fn level(variable: &str, level: &str) -> Self {
        Term {
            name: format!("{variable}[{level}]"),
            source: TermSource::Level { variable: variable.into(), level: level.into() },
        }
    }

    pub fn variable(&self) -> Option<&str> {
        match &self.source {
            TermSource::Intercept => None,
            TermSource::Numeric { variable } | TermSource::Level { variable, .. } => Some(variable),
        }
    }
}

/// Row-level fit outputs. Present on freshly fitted models; must be
/// stripped before a model is shared.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowDiagnostics {
    pub fitted: Vec<f64>,
    pub residuals: Vec<f64>,
}

/// A trained mapping model. Apart from the optional diagnostics it holds
/// only coefficients and scalar summaries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    pub family: ModelFamily,
    pub terms: Vec<Term>,
    pub coefficients: IndexMap<String, f64>,
    pub coefficient_se: IndexMap<String, f64>,
    pub transform: Transform,
    /// Clamp applied to responses before a logit/cloglog transform.
    pub epsilon: Option<f64>,
    pub sigma: Option<f64>,
    pub random_intercept_var: Option<f64>,
    pub n_train: usize,
    pub converged: bool,
    pub iterations: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<RowDiagnostics>,
}

impl FittedModel {
    pub(crate) fn assemble(
        family: ModelFamily,
        terms: &[Term],
        beta: &DVector<f64>,
        se: &DVector<f64>,
        transform: Transform,
        n_train: usize,
    ) -> Self {
        Self {
            family,
            terms: terms.to_vec(),
            coefficients: terms.iter().zip(beta.iter()).map(|(t, &b)| (t.name.clone(), b)).collect(),
            coefficient_se: terms.iter().zip(se.iter()).map(|(t, &s)| (t.name.clone(), s)).collect(),
            transform,
            epsilon: None,
            sigma: None,
            random_intercept_var: None,
            n_train,
            converged: true,
            iterations: 1,
            warnings: vec![],
            diagnostics: None,
        }
    }

    pub fn beta(&self) -> Vec<f64> {
        self.coefficients.values().copied().collect()
    }

    /// `eta = beta . x` for one design row.
    pub fn linear_predictor(&self, x: &[f64]) -> f64 {
        self.coefficients.values().zip(x).map(|(b, x)| b * x).sum()
    }

    /// Prediction on the utility scale.
    pub fn predict_row(&self, x: &[f64]) -> f64 {
        self.transform.inverse(self.linear_predictor(x))
    }

    /// Drops row-level diagnostics so the model can be shared.
    pub fn strip(mut self) -> Self {
        self.diagnostics = None;
        self
    }
}

/// Hand-built model with numeric terms, for tests.
#[cfg(test)]
pub(crate) fn default_terms_model(kind: ModelKind, transform: Transform, slopes: &[(&str, f64)], intercept: f64) -> FittedModel {
    let mut terms = vec![Term::intercept()];
    terms.extend(slopes.iter().map(|(n, _)| Term::numeric(n)));
    let mut beta = vec![intercept];
    beta.extend(slopes.iter().map(|s| s.1));
    let beta = DVector::from_vec(beta);
    let se = DVector::zeros(terms.len());
    FittedModel::assemble(ModelFamily::new(kind), &terms, &beta, &se, transform, 10)
}
