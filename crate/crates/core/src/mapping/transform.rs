use super::design::Design;
use super::model::{FittedModel, ModelFamily, ModelKind, RowDiagnostics, Transform};
use super::ols::fit_ols_as;
use super::MappingError;

pub const DEFAULT_EPSILON: f64 = 0.005;

/// OLS on a logit or cloglog transform of a response in [0, 1]. Responses
/// are first clamped to `[epsilon, 1 - epsilon]`.
pub fn fit_transformed_ols(
    y: &[f64],
    design: &Design,
    transform: Transform,
    epsilon: f64,
) -> Result<FittedModel, MappingError> {
    let kind = match transform {
        Transform::Logit => ModelKind::OlsLogitTransform,
        Transform::Cloglog => ModelKind::OlsCloglogTransform,
        other => return Err(MappingError::Family(format!("transform {other:?} is not logit or cloglog"))),
    };
    if !(epsilon > 0.0 && epsilon <= 0.01) {
        return Err(MappingError::Epsilon(epsilon));
    }
    if let Some((i, &v)) = y.iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
        return Err(MappingError::ResponseRange { row: i + 1, value: v });
    }
    let clamped: Vec<f64> = y.iter().map(|v| v.clamp(epsilon, 1.0 - epsilon)).collect();
    let z: Vec<f64> = clamped.iter().map(|&v| transform.forward(v)).collect();
    let mut model = fit_ols_as(&z, design, ModelFamily::new(kind), transform)?;
    model.epsilon = Some(epsilon);
    let eta = model.diagnostics.take().expect("fresh fit").fitted;
    let fitted: Vec<f64> = eta.iter().map(|&e| transform.inverse(e)).collect();
    model.diagnostics = Some(RowDiagnostics { residuals: y.iter().zip(&fitted).map(|(y, f)| y - f).collect(), fitted });
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn data() -> (Vec<f64>, Design) {
        let x: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|x| (0.05 + x * 0.05 + 0.02 * (x * 1.7).sin()).min(1.0)).collect();
        (y, Design::from_columns(&[("x", &x)]).unwrap())
    }

    #[test]
    fn inversion_reproduces_fitted_values() {
        let (y, d) = data();
        for t in [Transform::Logit, Transform::Cloglog] {
            let m = fit_transformed_ols(&y, &d, t, DEFAULT_EPSILON).unwrap();
            let fitted = m.diagnostics.clone().unwrap().fitted;
            for i in 0..d.n() {
                assert_eq!(m.predict_row(&d.row(i)), fitted[i]);
            }
        }
    }

    #[test]
    fn boundary_responses_are_clamped() {
        let (y, d) = data();
        assert_eq!(y[19], 1.0);
        let m = fit_transformed_ols(&y, &d, Transform::Logit, 0.01).unwrap();
        assert!(m.beta().iter().all(|b| b.is_finite()));
        assert_eq!(m.epsilon, Some(0.01));
    }

    #[test]
    fn composition_with_hand_transformed_ols() {
        let x = [0.0, 1.0, 2.0, 3.0, 4.0, 5.0];
        let y = [0.1, 0.25, 0.3, 0.55, 0.6, 0.85];
        let d = Design::from_columns(&[("x", &x)]).unwrap();
        let m = fit_transformed_ols(&y, &d, Transform::Logit, DEFAULT_EPSILON).unwrap();
        let z: Vec<f64> = y.iter().map(|p| (p / (1.0 - p)).ln()).collect();
        let oracle = crate::mapping::fit_ols(&z, &d).unwrap();
        for (a, b) in m.beta().iter().zip(oracle.beta()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_half_has_zero_logit_intercept() {
        let d = Design { terms: vec![crate::mapping::Term::intercept()], x: nalgebra::DMatrix::from_element(4, 1, 1.0) };
        let m = fit_transformed_ols(&[0.5; 4], &d, Transform::Logit, DEFAULT_EPSILON).unwrap();
        assert_eq!(m.beta(), vec![0.0]);
    }

    #[test]
    fn clamp_at_upper_edge() {
        let d = Design { terms: vec![crate::mapping::Term::intercept()], x: nalgebra::DMatrix::from_element(3, 1, 1.0) };
        let m = fit_transformed_ols(&[1.0; 3], &d, Transform::Logit, 0.001).unwrap();
        assert!((m.beta()[0] - (0.999f64 / 0.001).ln()).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_inputs() {
        let (mut y, d) = data();
        assert_eq!(fit_transformed_ols(&y, &d, Transform::Logit, 0.0).unwrap_err(), MappingError::Epsilon(0.0));
        assert_eq!(fit_transformed_ols(&y, &d, Transform::Logit, 0.02).unwrap_err(), MappingError::Epsilon(0.02));
        y[4] = 1.2;
        assert_eq!(
            fit_transformed_ols(&y, &d, Transform::Cloglog, 0.005).unwrap_err().to_string(),
            "row 5: response 1.2 outside [0, 1]"
        );
        assert!(fit_transformed_ols(&y, &d, Transform::Log, 0.005).is_err());
    }
}
