use nalgebra::{DMatrix, DVector};

use super::design::Design;
use super::model::{FittedModel, ModelFamily, ModelKind, RowDiagnostics, Term, Transform};
use super::MappingError;

/// Least-squares solution of `x b = y` via Householder QR.
pub(crate) struct LsSolution {
    pub beta: DVector<f64>,
    /// `(X'X)^-1`
    pub xtx_inv: DMatrix<f64>,
}

pub(crate) fn least_squares(x: &DMatrix<f64>, y: &DVector<f64>, terms: &[Term]) -> Result<LsSolution, MappingError> {
    let (n, p) = x.shape();
    if n < p {
        return Err(MappingError::TooFewRows { n, p });
    }
    let qr = x.clone().qr();
    let r = qr.r();
    for j in 0..p {
        let norm = x.column(j).norm();
        if norm == 0.0 || r[(j, j)].abs() <= 1e-10 * norm {
            return Err(MappingError::RankDeficient(terms[j].name.clone()));
        }
    }
    let q = qr.q();
    let solve = |rhs: &DVector<f64>| r.solve_upper_triangular(&(q.transpose() * rhs)).expect("nonsingular R");
    let mut beta = solve(y);
    // one round of iterative refinement
    let resid = y - x * &beta;
    beta += solve(&resid);
    let r_inv = r.solve_upper_triangular(&DMatrix::identity(p, p)).expect("nonsingular R");
    let xtx_inv = &r_inv * r_inv.transpose();
    Ok(LsSolution { beta, xtx_inv })
}

/// Ordinary least squares. Requires `n > p` and a full-rank design.
pub fn fit_ols(y: &[f64], design: &Design) -> Result<FittedModel, MappingError> {
    fit_ols_as(y, design, ModelFamily::new(ModelKind::Ols), Transform::Identity)
}

pub(crate) fn fit_ols_as(
    y: &[f64],
    design: &Design,
    family: ModelFamily,
    transform: Transform,
) -> Result<FittedModel, MappingError> {
    let (n, p) = design.x.shape();
    if y.len() != n {
        return Err(MappingError::Spec(format!("response has {} rows, design has {n}", y.len())));
    }
    if n <= p {
        return Err(MappingError::TooFewRows { n, p });
    }
    let yv = DVector::from_column_slice(y);
    let sol = least_squares(&design.x, &yv, &design.terms)?;
    let fitted = &design.x * &sol.beta;
    let resid = &yv - &fitted;
    let sigma2 = resid.norm_squared() / (n - p) as f64;
    let se = sol.xtx_inv.diagonal().map(|d| (sigma2 * d).sqrt());
    let mut model = FittedModel::assemble(family, &design.terms, &sol.beta, &se, transform, n);
    model.sigma = Some(sigma2.sqrt());
    model.diagnostics = Some(RowDiagnostics { fitted: fitted.iter().copied().collect(), residuals: resid.iter().copied().collect() });
    Ok(model)
}
