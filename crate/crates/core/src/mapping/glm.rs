use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::design::Design;
use super::model::{FittedModel, ModelFamily, ModelKind, RowDiagnostics, Transform};
use super::ols::least_squares;
use super::MappingError;

/// Log-link generalized linear models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GlmFamily {
    GaussianLog,
    GammaLog,
}

impl GlmFamily {
    pub fn kind(self) -> ModelKind {
        match self {
            GlmFamily::GaussianLog => ModelKind::GlmGaussianLog,
            GlmFamily::GammaLog => ModelKind::GlmGammaLog,
        }
    }

    fn deviance(self, y: &[f64], mu: &DVector<f64>) -> f64 {
        y.iter()
            .zip(mu.iter())
            .map(|(&y, &m)| match self {
                GlmFamily::GaussianLog => (y - m).powi(2),
                GlmFamily::GammaLog => 2.0 * (-(y / m).ln() + (y - m) / m),
            })
            .sum()
    }
}

fn mean(design: &Design, beta: &DVector<f64>) -> DVector<f64> {
    (&design.x * beta).map(f64::exp)
}

/// Log-likelihood at unit dispersion, up to a constant.
pub fn log_likelihood(family: GlmFamily, y: &[f64], design: &Design, beta: &[f64]) -> f64 {
    let mu = mean(design, &DVector::from_column_slice(beta));
    y.iter()
        .zip(mu.iter())
        .map(|(&y, &m)| match family {
            GlmFamily::GaussianLog => -0.5 * (y - m).powi(2),
            GlmFamily::GammaLog => -y / m - m.ln(),
        })
        .sum()
}

/// Gradient of [`log_likelihood`] with respect to the coefficients.
pub fn score_vector(family: GlmFamily, y: &[f64], design: &Design, beta: &[f64]) -> Vec<f64> {
    let mu = mean(design, &DVector::from_column_slice(beta));
    let u = DVector::from_iterator(
        y.len(),
        y.iter().zip(mu.iter()).map(|(&y, &m)| match family {
            GlmFamily::GaussianLog => (y - m) * m,
            GlmFamily::GammaLog => (y - m) / m,
        }),
    );
    (design.x.transpose() * u).iter().copied().collect()
}

/// Fits a log-link GLM by iteratively reweighted least squares with step
/// halving. Non-convergence is reported through `converged` and a warning.
pub fn fit_glm_irls(
    y: &[f64],
    design: &Design,
    family: GlmFamily,
    max_iter: usize,
    tol: f64,
) -> Result<FittedModel, MappingError> {
    let limits = ModelFamily::with_limits(family.kind(), max_iter, tol)?;
    let (n, p) = design.x.shape();
    if y.len() != n {
        return Err(MappingError::Spec(format!("response has {} rows, design has {n}", y.len())));
    }
    if let Some(i) = y.iter().position(|&v| v.is_nan() || v <= 0.0) {
        return Err(MappingError::NonPositiveResponse(i + 1));
    }
    if n <= p {
        return Err(MappingError::TooFewRows { n, p });
    }
    let log_y = DVector::from_iterator(n, y.iter().map(|v| v.ln()));
    let mut beta = least_squares(&design.x, &log_y, &design.terms)?.beta;
    let mut dev = family.deviance(y, &mean(design, &beta));
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        let eta = &design.x * &beta;
        let mu = eta.map(f64::exp);
        let z = DVector::from_iterator(n, (0..n).map(|i| eta[i] + (y[i] - mu[i]) / mu[i]));
        let w = working_weights(family, &mu);
        let sw = w.map(f64::sqrt);
        let xw = DMatrix::from_fn(n, p, |i, j| design.x[(i, j)] * sw[i]);
        let zw = z.component_mul(&sw);
        let proposal = least_squares(&xw, &zw, &design.terms)?.beta;
        let mut step = &proposal - &beta;
        let mut new_beta = &beta + &step;
        let mut new_dev = family.deviance(y, &mean(design, &new_beta));
        let mut halvings = 0;
        while (new_dev.is_nan() || new_dev > dev * (1.0 + 1e-12)) && halvings < 40 {
            step *= 0.5;
            new_beta = &beta + &step;
            new_dev = family.deviance(y, &mean(design, &new_beta));
            halvings += 1;
        }
        let change = step
            .iter()
            .zip(new_beta.iter())
            .map(|(d, b)| d.abs() / b.abs().max(1.0))
            .fold(0.0, f64::max);
        beta = new_beta;
        dev = new_dev;
        if change < tol {
            converged = true;
            break;
        }
    }
    let mu = mean(design, &beta);
    let phi = match family {
        GlmFamily::GaussianLog => (0..n).map(|i| (y[i] - mu[i]).powi(2)).sum::<f64>(),
        GlmFamily::GammaLog => (0..n).map(|i| ((y[i] - mu[i]) / mu[i]).powi(2)).sum::<f64>(),
    } / (n - p) as f64;
    let w = working_weights(family, &mu);
    let xtwx = DMatrix::from_fn(p, p, |a, b| (0..n).map(|i| w[i] * design.x[(i, a)] * design.x[(i, b)]).sum::<f64>());
    let se = xtwx
        .try_inverse()
        .ok_or_else(|| MappingError::RankDeficient(design.terms[p - 1].name.clone()))?
        .diagonal()
        .map(|d| (phi * d).sqrt());
    let mut model = FittedModel::assemble(limits, &design.terms, &beta, &se, Transform::Log, n);
    model.sigma = Some(phi.sqrt());
    model.converged = converged;
    model.iterations = iterations;
    if !converged {
        model.warnings.push(format!("IRLS did not converge within {max_iter} iterations"));
    }
    model.diagnostics = Some(RowDiagnostics {
        fitted: mu.iter().copied().collect(),
        residuals: (0..n).map(|i| y[i] - mu[i]).collect(),
    });
    Ok(model)
}

fn working_weights(family: GlmFamily, mu: &DVector<f64>) -> DVector<f64> {
    match family {
        GlmFamily::GaussianLog => mu.map(|m| m * m),
        GlmFamily::GammaLog => DVector::from_element(mu.len(), 1.0),
    }
}
