use std::fmt;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::data::{Column, ValidatedDataset};
use crate::mapping::{FittedModel, TermSource};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CompatibilityReport {
    pub ok: bool,
    pub issues: Vec<String>,
}

impl fmt::Display for CompatibilityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.ok {
            f.write_str("compatible")
        } else {
            f.write_str(&self.issues.join("; "))
        }
    }
}

/// Maps every coefficient to the column it was trained on.
pub fn default_variable_map(model: &FittedModel) -> IndexMap<String, String> {
    model.terms.iter().filter_map(|t| Some((t.name.clone(), t.variable()?.to_string()))).collect()
}

/// Checks that each non-intercept coefficient has a usable source column.
/// Plain coefficients need numeric columns; level indicators need a
/// categorical column admitting that level.
pub fn check_compatibility(model: &FittedModel, newdata: &ValidatedDataset, variable_map: &IndexMap<String, String>) -> CompatibilityReport {
    let mut issues = vec![];
    for term in &model.terms {
        if term.source == TermSource::Intercept {
            continue;
        }
        let Some(col_name) = variable_map.get(&term.name) else {
            issues.push(format!("coefficient {} has no source column", term.name));
            continue;
        };
        let Some(col) = newdata.column(col_name) else {
            issues.push(format!("coefficient {}: column '{col_name}' not found", term.name));
            continue;
        };
        match (&term.source, col) {
            (TermSource::Numeric { .. }, c) if c.class().is_numeric() => {}
            (TermSource::Numeric { .. }, c) => issues.push(format!(
                "coefficient {}: column '{col_name}' is {}, expected numeric",
                term.name,
                c.class()
            )),
            (TermSource::Level { level, .. }, Column::Categorical(_)) => {
                let allowed = newdata.dictionary().get(col_name).and_then(|e| e.allowed_set.as_ref());
                if let Some(set) = allowed.filter(|set| !set.contains(level)) {
                    issues.push(format!(
                        "coefficient {}: level '{level}' not among column '{col_name}' levels {{{}}}",
                        term.name,
                        set.join(", ")
                    ));
                }
            }
            (TermSource::Level { .. }, c) => issues.push(format!(
                "coefficient {}: column '{col_name}' is {}, expected categorical",
                term.name,
                c.class()
            )),
            (TermSource::Intercept, _) => unreachable!(),
        }
    }
    for key in variable_map.keys() {
        if !model.coefficients.contains_key(key) {
            issues.push(format!("variable map names unknown coefficient {key}"));
        }
    }
    CompatibilityReport { ok: issues.is_empty(), issues }
}
