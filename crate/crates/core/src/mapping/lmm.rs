use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use super::design::Design;
use super::model::{FittedModel, ModelFamily, ModelKind, RowDiagnostics, Transform};
use super::ols::least_squares;
use super::MappingError;

struct Clusters {
    /// Row indices of each cluster.
    members: Vec<Vec<usize>>,
}

impl Clusters {
    fn new(ids: &[String]) -> Self {
        let mut map: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for (i, id) in ids.iter().enumerate() {
            map.entry(id).or_default().push(i);
        }
        Self { members: map.into_values().collect() }
    }
}

/// Marginal log-likelihood of a random-intercept model:
/// `y_i ~ N(X_i b, se2 I + sb2 J)` for each cluster `i`.
pub fn lmm_log_likelihood(y: &[f64], design: &Design, clusters: &[String], beta: &[f64], sb2: f64, se2: f64) -> f64 {
    let beta = DVector::from_column_slice(beta);
    let r = DVector::from_column_slice(y) - &design.x * beta;
    loglik(&Clusters::new(clusters), &r, sb2, se2)
}

fn loglik(cl: &Clusters, r: &DVector<f64>, sb2: f64, se2: f64) -> f64 {
    let ln2pi = (2.0 * std::f64::consts::PI).ln();
    cl.members
        .iter()
        .map(|rows| {
            let n = rows.len() as f64;
            let s: f64 = rows.iter().map(|&i| r[i]).sum();
            let ss: f64 = rows.iter().map(|&i| r[i] * r[i]).sum();
            let c = sb2 / (se2 + n * sb2);
            -0.5 * (n * ln2pi + (n - 1.0) * se2.ln() + (se2 + n * sb2).ln() + (ss - c * s * s) / se2)
        })
        .sum()
}

/// Generalized least squares for fixed variance components. Returns the
/// coefficients and `(X' V^-1 X)^-1`.
fn gls(x: &DMatrix<f64>, y: &DVector<f64>, cl: &Clusters, sb2: f64, se2: f64) -> Option<(DVector<f64>, DMatrix<f64>)> {
    let p = x.ncols();
    let mut a = DMatrix::<f64>::zeros(p, p);
    let mut b = DVector::<f64>::zeros(p);
    for rows in &cl.members {
        let n = rows.len() as f64;
        let c = sb2 / (se2 + n * sb2);
        let mut sx = DVector::<f64>::zeros(p);
        let mut sy = 0.0;
        for &i in rows {
            let xi = x.row(i).transpose();
            a += &xi * xi.transpose();
            b += &xi * y[i];
            sx += &xi;
            sy += y[i];
        }
        a -= c * &sx * sx.transpose();
        b -= c * sy * &sx;
    }
    let a = a / se2;
    let b = b / se2;
    let inv = a.try_inverse()?;
    Some((&inv * b, inv))
}

#[derive(Debug, Clone)]
struct Theta {
    beta: DVector<f64>,
    sb2: f64,
    se2: f64,
}

impl Theta {
    fn sub(&self, o: &Theta) -> Theta {
        Theta { beta: &self.beta - &o.beta, sb2: self.sb2 - o.sb2, se2: self.se2 - o.se2 }
    }

    fn axpy(&self, a: f64, d: &Theta) -> Theta {
        Theta { beta: &self.beta + &d.beta * a, sb2: self.sb2 + a * d.sb2, se2: self.se2 + a * d.se2 }
    }

    fn norm(&self) -> f64 {
        (self.beta.norm_squared() + self.sb2 * self.sb2 + self.se2 * self.se2).sqrt()
    }
}

struct Em<'a> {
    x: &'a DMatrix<f64>,
    y: &'a DVector<f64>,
    cl: &'a Clusters,
    xtx_inv: &'a DMatrix<f64>,
}

impl Em<'_> {
    fn loglik(&self, t: &Theta) -> f64 {
        loglik(self.cl, &(self.y - self.x * &t.beta), t.sb2, t.se2)
    }

    /// One parameter-expanded EM update: the random effect gets a working
    /// scale `a` fitted jointly with the fixed effects, then `sb2` is
    /// rescaled by `a^2`. A zero cluster variance is absorbing.
    fn step(&self, t: &Theta) -> Theta {
        let (n, p) = self.x.shape();
        let r = self.y - self.x * &t.beta;
        if t.sb2 <= 0.0 {
            let beta = self.xtx_inv * (self.x.transpose() * self.y);
            let se2 = (self.y - self.x * &beta).norm_squared() / n as f64;
            return Theta { beta, sb2: 0.0, se2 };
        }
        let mut a = DMatrix::<f64>::zeros(n, p + 1);
        a.view_mut((0, 0), (n, p)).copy_from(self.x);
        let mut sum_b = 0.0;
        let mut extra = 0.0;
        for rows in &self.cl.members {
            let ni = rows.len() as f64;
            let v = 1.0 / (1.0 / t.sb2 + ni / t.se2);
            let m = v * rows.iter().map(|&i| r[i]).sum::<f64>() / t.se2;
            sum_b += m * m + v;
            extra += ni * v;
            for &i in rows {
                a[(i, p)] = m;
            }
        }
        let mut gram = a.transpose() * &a;
        gram[(p, p)] += extra;
        let rhs = a.transpose() * self.y;
        let Some(sol) = gram.clone().cholesky().map(|c| c.solve(&rhs)) else {
            return self.step(&Theta { sb2: 0.0, ..t.clone() });
        };
        let scale = sol[p];
        let beta = sol.rows(0, p).into_owned();
        let se2 = ((self.y - &a * &sol).norm_squared() + scale * scale * extra) / n as f64;
        Theta { beta, sb2: scale * scale * sum_b / self.cl.members.len() as f64, se2 }
    }
}

/// Linear mixed model with a random intercept per cluster, fitted by
/// maximum likelihood with the EM algorithm. The boundary solution with no
/// cluster variance is also evaluated and kept if its likelihood is higher.
pub fn fit_lmm_random_intercept(
    y: &[f64],
    design: &Design,
    clusters: &[String],
    max_iter: usize,
    tol: f64,
) -> Result<FittedModel, MappingError> {
    let family = ModelFamily::with_limits(ModelKind::LmmRandomIntercept, max_iter, tol)?;
    let (n, p) = design.x.shape();
    if y.len() != n || clusters.len() != n {
        return Err(MappingError::Spec(format!(
            "response has {} rows and clusters {}, design has {n}",
            y.len(),
            clusters.len()
        )));
    }
    if n <= p {
        return Err(MappingError::TooFewRows { n, p });
    }
    let cl = Clusters::new(clusters);
    if cl.members.len() < 2 {
        return Err(MappingError::SingleCluster);
    }
    let x = &design.x;
    let yv = DVector::from_column_slice(y);
    let ols = least_squares(x, &yv, &design.terms)?;
    let ols_resid = &yv - x * &ols.beta;
    let rss = ols_resid.norm_squared();
    if rss == 0.0 {
        return Err(MappingError::Spec("response is fitted exactly; variance components are not identifiable".into()));
    }
    let nf = n as f64;

    let em = Em { x, y: &yv, cl: &cl, xtx_inv: &ols.xtx_inv };
    let mut theta = Theta { beta: ols.beta.clone(), sb2: 0.5 * rss / nf, se2: 0.5 * rss / nf };
    let mut ll = em.loglik(&theta);
    let mut converged = false;
    let mut iterations = 0;
    // SQUAREM: two EM steps, a squared extrapolation projected onto
    // sb2 >= 0, and a stabilising EM step. Falls back to the plain EM
    // iterate when the extrapolation loses likelihood.
    while iterations < max_iter {
        let t1 = em.step(&theta);
        let t2 = em.step(&t1);
        iterations += 2;
        let r = t1.sub(&theta);
        let v = t2.sub(&t1).sub(&r);
        let ll2 = em.loglik(&t2);
        let mut next = (t2, ll2);
        let (rn, vn) = (r.norm(), v.norm());
        if vn > 0.0 && iterations < max_iter {
            let alpha = (-rn / vn).min(-1.0);
            let mut jump = theta.axpy(-2.0 * alpha, &r).axpy(alpha * alpha, &v);
            jump.sb2 = jump.sb2.max(0.0);
            if jump.se2 > 0.0 {
                let stable = em.step(&jump);
                iterations += 1;
                let lls = em.loglik(&stable);
                if lls >= next.1 {
                    next = (stable, lls);
                }
            }
        }
        let change = (next.1 - ll).abs() / ll.abs().max(1.0);
        theta = next.0;
        ll = next.1;
        if change < tol {
            converged = true;
            break;
        }
    }
    let Theta { mut sb2, mut se2, .. } = theta;
    let mut warnings = vec![];
    if !converged {
        warnings.push(format!("EM did not converge within {max_iter} iterations"));
    }
    let (gls_beta, mut cov) = gls(x, &yv, &cl, sb2, se2).ok_or_else(|| MappingError::RankDeficient(design.terms[p - 1].name.clone()))?;
    let mut beta = gls_beta;
    ll = loglik(&cl, &(&yv - x * &beta), sb2, se2);

    let boundary_se2 = rss / nf;
    let boundary_ll = loglik(&cl, &ols_resid, 0.0, boundary_se2);
    if boundary_ll >= ll {
        beta = ols.beta.clone();
        sb2 = 0.0;
        se2 = boundary_se2;
        cov = ols.xtx_inv.clone() * se2;
        converged = true;
        warnings.clear();
    }
    let se = cov.diagonal().map(f64::sqrt);
    let mut model = FittedModel::assemble(family, &design.terms, &beta, &se, Transform::Identity, n);
    model.sigma = Some(se2.sqrt());
    model.random_intercept_var = Some(sb2);
    model.converged = converged;
    model.iterations = iterations;
    model.warnings = warnings;
    let fitted = x * &beta;
    model.diagnostics = Some(RowDiagnostics {
        fitted: fitted.iter().copied().collect(),
        residuals: (&yv - &fitted).iter().copied().collect(),
    });
    Ok(model)
}
