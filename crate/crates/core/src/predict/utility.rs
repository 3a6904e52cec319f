use indexmap::IndexMap;
use rayon::prelude::*;

use super::compat::check_compatibility;
use super::PredictError;
use crate::data::ValidatedDataset;
use crate::json::format_f64;
use crate::mapping::FittedModel;

#[derive(Debug, Clone)]
pub struct PredictionRequest<'a> {
    pub model: &'a FittedModel,
    pub newdata: &'a ValidatedDataset,
    /// Coefficient name to newdata column.
    pub variable_map: IndexMap<String, String>,
    /// Instrument utility bounds; predictions are clamped into them.
    pub utility_bounds: [f64; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct Predictions {
    /// `None` where a predictor is missing.
    pub values: Vec<Option<f64>>,
    pub clamped: Vec<bool>,
    pub clamp_count: usize,
}

impl Predictions {
    /// `uid,round,predicted_utility,clamped`
    pub fn to_csv(&self, ds: &ValidatedDataset) -> String {
        let uids = ds.uids();
        let rounds = ds.metadata().round_var.as_ref().and_then(|r| ds.column(r));
        let mut out = String::from("uid,round,predicted_utility,clamped\n");
        for i in 0..self.values.len() {
            let round = rounds.and_then(|c| c.cell_text(i)).unwrap_or_else(|| "NA".into());
            let value = self.values[i].map(format_f64).unwrap_or_else(|| "NA".into());
            let uid = uids[i].as_deref().unwrap_or("NA");
            out.push_str(&format!("{uid},{round},{value},{}\n", self.clamped[i]));
        }
        out
    }
}

/// Applies the model row by row: linear predictor, inverse link, clamp.
pub fn predict_utility(request: &PredictionRequest<'_>) -> Result<Predictions, PredictError> {
    let PredictionRequest { model, newdata, variable_map, utility_bounds: [lo, hi] } = request;
    let report = check_compatibility(model, newdata, variable_map);
    if !report.ok {
        return Err(PredictError::Incompatible(report));
    }
    let n = newdata.n_rows();
    let cols = model
        .terms
        .iter()
        .map(|t| {
            let col = variable_map.get(&t.name).and_then(|c| newdata.column(c));
            crate::mapping::term_values(t, col, n).map_err(PredictError::Spec)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let rows: Vec<(Option<f64>, bool)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let x: Option<Vec<f64>> = cols.iter().map(|c| c[i]).collect();
            match x {
                None => (None, false),
                Some(x) => {
                    let u = model.predict_row(&x);
                    let c = u.clamp(*lo, *hi);
                    (Some(c), c != u)
                }
            }
        })
        .collect();
    let clamp_count = rows.iter().filter(|r| r.1).count();
    let (values, clamped) = rows.into_iter().unzip();
    Ok(Predictions { values, clamped, clamp_count })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{ingest_table, load_dictionary, validate_dataset, DatasetMetadata};
    use crate::mapping::{default_terms_model, ModelKind, Transform};
    use crate::predict::default_variable_map;

    fn newdata() -> ValidatedDataset {
        let dict = load_dictionary(
            "variable,class,min,max,allowed_set,description\n\
             uid,text,,,,id\nx,double,,,,score\nsex,categorical,,,F|M,sex\n",
        )
        .unwrap();
        let raw = ingest_table("uid,x,sex\nA,0,F\nB,1,M\nC,NA,M\nD,-3,F\n", "NA").unwrap();
        validate_dataset(&raw, &dict, &DatasetMetadata::new("uid")).unwrap()
    }

    fn request<'a>(model: &'a FittedModel, ds: &'a ValidatedDataset, bounds: [f64; 2]) -> PredictionRequest<'a> {
        PredictionRequest { model, newdata: ds, variable_map: default_variable_map(model), utility_bounds: bounds }
    }

    #[test]
    fn inverse_link_hand_cases() {
        let ds = newdata();
        let ols = default_terms_model(ModelKind::Ols, Transform::Identity, &[("x", 2.0)], 1.0);
        let p = predict_utility(&request(&ols, &ds, [-10.0, 10.0])).unwrap();
        assert_eq!(p.values, vec![Some(1.0), Some(3.0), None, Some(-5.0)]);

        let logit = default_terms_model(ModelKind::OlsLogitTransform, Transform::Logit, &[], 0.0);
        let p = predict_utility(&request(&logit, &ds, [0.0, 1.0])).unwrap();
        assert_eq!(p.values[0], Some(0.5));

        let glm = default_terms_model(ModelKind::GlmGaussianLog, Transform::Log, &[], 0.8f64.ln());
        let p = predict_utility(&request(&glm, &ds, [0.0, 1.0])).unwrap();
        assert!((p.values[0].unwrap() - 0.8).abs() < 1e-15);
    }

    #[test]
    fn predictions_are_clamped_and_counted() {
        let ds = newdata();
        let ols = default_terms_model(ModelKind::Ols, Transform::Identity, &[("x", 2.0)], 1.0);
        let p = predict_utility(&request(&ols, &ds, [-0.2, 1.0])).unwrap();
        assert_eq!(p.values, vec![Some(1.0), Some(1.0), None, Some(-0.2)]);
        assert_eq!(p.clamped, vec![false, true, false, true]);
        assert_eq!(p.clamp_count, 2);
        assert!(p.to_csv(&ds).starts_with("uid,round,predicted_utility,clamped\nA,NA,1.0000000000000000e0,false\n"));
    }

    #[test]
    fn compatibility_issues() {
        let ds = newdata();
        let m = default_terms_model(ModelKind::Ols, Transform::Identity, &[("k6", 0.1)], 0.5);
        let report = check_compatibility(&m, &ds, &IndexMap::new());
        assert_eq!(report.issues, vec!["coefficient k6 has no source column".to_string()]);
        let map: IndexMap<String, String> = [("k6".to_string(), "sex".to_string())].into_iter().collect();
        let report = check_compatibility(&m, &ds, &map);
        assert!(!report.ok);
        assert_eq!(report.issues, vec!["coefficient k6: column 'sex' is categorical, expected numeric".to_string()]);
        let map: IndexMap<String, String> = [("k6".to_string(), "x".to_string())].into_iter().collect();
        assert!(check_compatibility(&m, &ds, &map).ok);
        let e = predict_utility(&PredictionRequest { model: &m, newdata: &ds, variable_map: IndexMap::new(), utility_bounds: [0.0, 1.0] })
            .unwrap_err();
        assert_eq!(e.to_string(), "model is incompatible with the data: coefficient k6 has no source column");
    }
}
