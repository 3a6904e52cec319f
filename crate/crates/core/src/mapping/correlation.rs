use serde::{Deserialize, Serialize};

use super::MappingError;
use crate::data::ValidatedDataset;

/// Pearson correlation; `None` if either input is constant.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    (sxx > 0.0 && syy > 0.0).then(|| (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub variables: Vec<String>,
    /// Row-major; `None` marks an undefined correlation.
    pub values: Vec<Vec<Option<f64>>>,
    /// Pairwise-complete counts.
    pub n: Vec<Vec<usize>>,
}

impl CorrelationMatrix {
    pub fn get(&self, a: &str, b: &str) -> Option<f64> {
        let i = self.variables.iter().position(|v| v == a)?;
        let j = self.variables.iter().position(|v| v == b)?;
        self.values[i][j]
    }
}

/// Pairwise-complete Pearson correlations between numeric variables.
pub fn correlation_matrix(ds: &ValidatedDataset, vars: &[&str]) -> Result<CorrelationMatrix, MappingError> {
    let cols = vars
        .iter()
        .map(|v| {
            let col = ds.column(v).ok_or_else(|| MappingError::UnknownVariable(v.to_string()))?;
            if !col.class().is_numeric() {
                return Err(MappingError::Spec(format!("variable '{v}' is {}, not numeric", col.class())));
            }
            Ok(col.as_f64().expect("numeric"))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let k = vars.len();
    let mut values = vec![vec![None; k]; k];
    let mut counts = vec![vec![0; k]; k];
    for i in 0..k {
        for j in i..k {
            let (a, b): (Vec<f64>, Vec<f64>) =
                cols[i].iter().zip(&cols[j]).filter_map(|(a, b)| Some(((*a)?, (*b)?))).unzip();
            if a.len() < 3 {
                return Err(MappingError::Spec(format!(
                    "{} and {}: {} pairwise-complete observations, need at least 3",
                    vars[i],
                    vars[j],
                    a.len()
                )));
            }
            let r = if i == j { pearson(&a, &b).map(|_| 1.0) } else { pearson(&a, &b) };
            values[i][j] = r;
            values[j][i] = r;
            counts[i][j] = a.len();
            counts[j][i] = a.len();
        }
    }
    Ok(CorrelationMatrix { variables: vars.iter().map(|v| v.to_string()).collect(), values, n: counts })
}
