use super::template::RenderContext;
use crate::data::DescriptiveSummary;
use crate::mapping::ModelCatalogue;

fn fixed(x: f64) -> String {
    format!("{x:.4}")
}

fn opt(x: Option<f64>) -> String {
    x.map(fixed).unwrap_or_else(|| "NA".into())
}

/// Keys describing a model catalogue: metadata, the best model, a
/// `performance` table and the best model's `best_coefficients`.
pub fn catalogue_context(cat: &ModelCatalogue) -> RenderContext {
    let mut ctx = RenderContext::new();
    ctx.text("instrument", &cat.instrument)
        .text("toolkit_version", &cat.toolkit_version)
        .text("dataset_fingerprint", &cat.dataset_fingerprint)
        .text("created_utc", &cat.created_utc)
        .number("n_models", cat.models.len() as f64);
    let rows = cat
        .models
        .iter()
        .enumerate()
        .map(|(i, e)| {
            let p = &e.performance;
            vec![
                (i + 1).to_string(),
                p.family.to_string(),
                p.predictors.join(" + "),
                p.covariates.join(" + "),
                opt(p.cv.r2),
                fixed(p.cv.rmse),
                fixed(p.cv.mae),
                opt(p.in_sample.r2),
                fixed(p.in_sample.rmse),
            ]
        })
        .collect();
    ctx.table(
        "performance",
        &["rank", "family", "predictors", "covariates", "R2 (CV)", "RMSE (CV)", "MAE (CV)", "R2 (in)", "RMSE (in)"],
        rows,
    );
    if let Some(best) = cat.models.first() {
        ctx.text("best_family", best.performance.family.to_string())
            .text("best_predictors", best.performance.predictors.join(" + "))
            .text("best_rmse_cv", fixed(best.performance.cv.rmse))
            .text("best_r2_cv", opt(best.performance.cv.r2));
        let rows = best
            .model
            .coefficients
            .iter()
            .map(|(k, b)| vec![k.clone(), format!("{b:.6}"), format!("{:.6}", best.model.coefficient_se[k])])
            .collect();
        ctx.table("best_coefficients", &["term", "estimate", "std. error"], rows);
    }
    ctx
}

/// Keys describing a dataset summary: `n_rows`, a `strata` table and a
/// `variables` table for the whole sample.
pub fn summary_context(summary: &DescriptiveSummary) -> RenderContext {
    let mut ctx = RenderContext::new();
    let overall = summary.strata.first();
    ctx.number("n_rows", overall.map_or(0, |s| s.n_rows) as f64);
    let strata = summary
        .strata
        .iter()
        .map(|s| {
            let label = match (&s.group, &s.round) {
                (None, None) => "all".to_string(),
                (g, r) => [g.as_ref().map(|g| format!("group {g}")), r.as_ref().map(|r| format!("round {r}"))]
                    .into_iter()
                    .flatten()
                    .collect::<Vec<_>>()
                    .join(", "),
            };
            vec![label, s.n_rows.to_string()]
        })
        .collect();
    ctx.table("strata", &["stratum", "n"], strata);
    let vars = overall
        .map(|s| {
            s.variables
                .iter()
                .map(|v| {
                    let (mean, sd, range) = match &v.numeric {
                        Some(st) => (fixed(st.mean), opt(st.sd), format!("{} to {}", st.min, st.max)),
                        None => ("".into(), "".into(), "".into()),
                    };
                    let levels = v
                        .levels
                        .as_ref()
                        .map(|l| l.iter().map(|(k, c)| format!("{k}: {c}")).collect::<Vec<_>>().join(", "))
                        .unwrap_or_default();
                    vec![v.variable.clone(), v.class.to_string(), v.n.to_string(), v.n_missing.to_string(), mean, sd, range, levels]
                })
                .collect()
        })
        .unwrap_or_default();
    ctx.table("variables", &["variable", "class", "n", "missing", "mean", "sd", "range", "levels"], vars);
    ctx
}
