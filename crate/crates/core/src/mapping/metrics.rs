use serde::{Deserialize, Serialize};

use super::MappingError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// `None` when the observed values have zero variance.
    pub r2: Option<f64>,
    pub rmse: f64,
    pub mae: f64,
}

pub fn compute_metrics(observed: &[f64], predicted: &[f64]) -> Result<Metrics, MappingError> {
    if observed.len() != predicted.len() {
        return Err(MappingError::Metrics(format!(
            "{} observed values but {} predictions",
            observed.len(),
            predicted.len()
        )));
    }
    if observed.len() < 2 {
        return Err(MappingError::Metrics(format!("need at least 2 observations, got {}", observed.len())));
    }
    if observed.iter().chain(predicted).any(|v| !v.is_finite()) {
        return Err(MappingError::Metrics("non-finite value".into()));
    }
    let n = observed.len() as f64;
    let mean = observed.iter().sum::<f64>() / n;
    let ss_res: f64 = observed.iter().zip(predicted).map(|(o, p)| (o - p).powi(2)).sum();
    let ss_tot: f64 = observed.iter().map(|o| (o - mean).powi(2)).sum();
    let mae = observed.iter().zip(predicted).map(|(o, p)| (o - p).abs()).sum::<f64>() / n;
    Ok(Metrics { r2: (ss_tot > 0.0).then(|| 1.0 - ss_res / ss_tot), rmse: (ss_res / n).sqrt(), mae })
}
