use nalgebra::DMatrix;

use super::model::{Term, TermSource};
use super::MappingError;
use crate::data::{Column, ValidatedDataset};

/// Column layout of a design matrix: intercept, numeric variables as-is,
/// categorical variables as indicators of every non-reference level.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignSpec {
    pub terms: Vec<Term>,
}

/// A design matrix together with the terms naming its columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    pub terms: Vec<Term>,
    pub x: DMatrix<f64>,
}

impl Design {
    /// Intercept plus the given numeric columns.
    pub fn from_columns(columns: &[(&str, &[f64])]) -> Result<Self, MappingError> {
        let n = columns.first().map(|c| c.1.len()).unwrap_or(0);
        if let Some((name, c)) = columns.iter().find(|c| c.1.len() != n) {
            return Err(MappingError::Spec(format!("column '{name}' has {} rows, expected {n}", c.len())));
        }
        let mut terms = vec![Term::intercept()];
        terms.extend(columns.iter().map(|(name, _)| Term::numeric(name)));
        let x = DMatrix::from_fn(n, terms.len(), |i, j| if j == 0 { 1.0 } else { columns[j - 1].1[i] });
        Ok(Self { terms, x })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn rows(&self, idx: &[usize]) -> Design {
        Design { terms: self.terms.clone(), x: self.x.select_rows(idx) }
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.x.row(i).iter().copied().collect()
    }
}

/// Values a term takes on a column; `None` where the cell is missing.
pub(crate) fn term_values(term: &Term, col: Option<&Column>, n: usize) -> Result<Vec<Option<f64>>, String> {
    match &term.source {
        TermSource::Intercept => Ok(vec![Some(1.0); n]),
        TermSource::Numeric { variable } => {
            let col = col.ok_or_else(|| format!("column '{variable}' not found"))?;
            col.as_f64().ok_or_else(|| format!("column for '{}' is {}, expected numeric", term.name, col.class()))
        }
        TermSource::Level { level, .. } => {
            let col = col.ok_or_else(|| format!("column for '{}' not found", term.name))?;
            match col {
                Column::Categorical(v) => Ok(v.iter().map(|c| c.as_ref().map(|c| if c == level { 1.0 } else { 0.0 })).collect()),
                other => Err(format!("column for '{}' is {}, expected categorical", term.name, other.class())),
            }
        }
    }
}

/// Rows with every listed variable present.
pub fn complete_rows(ds: &ValidatedDataset, vars: &[&str]) -> Result<Vec<usize>, MappingError> {
    let cols = vars
        .iter()
        .map(|v| ds.column(v).ok_or_else(|| MappingError::UnknownVariable(v.to_string())))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((0..ds.n_rows()).filter(|&i| cols.iter().all(|c| !c.is_missing(i))).collect())
}

impl DesignSpec {
    /// Layout for `vars` over `rows`. Categorical levels absent from those
    /// rows get no column; the first present allowed level is the reference.
    pub fn from_dataset(ds: &ValidatedDataset, vars: &[String], rows: &[usize]) -> Result<Self, MappingError> {
        let mut terms = vec![Term::intercept()];
        for v in vars {
            let col = ds.column(v).ok_or_else(|| MappingError::UnknownVariable(v.clone()))?;
            match col {
                Column::Categorical(cells) => {
                    let entry = ds.dictionary().get(v).ok_or_else(|| MappingError::UnknownVariable(v.clone()))?;
                    let levels: Vec<String> = match &entry.allowed_set {
                        Some(set) => set.clone(),
                        None => {
                            let mut seen: Vec<String> = rows.iter().filter_map(|&i| cells[i].clone()).collect();
                            seen.sort();
                            seen.dedup();
                            seen
                        }
                    };
                    let present: Vec<&String> =
                        levels.iter().filter(|lvl| rows.iter().any(|&i| cells[i].as_ref() == Some(*lvl))).collect();
                    terms.extend(present.iter().skip(1).map(|lvl| Term::level(v, lvl)));
                }
                c if c.class().is_numeric() => terms.push(Term::numeric(v)),
                c => {
                    return Err(MappingError::Spec(format!(
                        "variable '{v}' is {}; only numeric or categorical variables can enter a model",
                        c.class()
                    )))
                }
            }
        }
        Ok(Self { terms })
    }

    /// Builds the matrix for `rows`; every referenced cell must be present.
    pub fn build(&self, ds: &ValidatedDataset, rows: &[usize]) -> Result<Design, MappingError> {
        let n = ds.n_rows();
        let cols = self
            .terms
            .iter()
            .map(|t| term_values(t, t.variable().and_then(|v| ds.column(v)), n).map_err(MappingError::Spec))
            .collect::<Result<Vec<_>, _>>()?;
        let mut x = DMatrix::zeros(rows.len(), self.terms.len());
        for (j, col) in cols.iter().enumerate() {
            for (r, &i) in rows.iter().enumerate() {
                x[(r, j)] = col[i].ok_or_else(|| {
                    MappingError::Spec(format!("row {}: '{}' is missing", i + 1, self.terms[j].name))
                })?;
            }
        }
        Ok(Design { terms: self.terms.clone(), x })
    }
}

pub(crate) fn response(ds: &ValidatedDataset, target: &str, rows: &[usize]) -> Result<Vec<f64>, MappingError> {
    let col = ds.column(target).ok_or_else(|| MappingError::UnknownVariable(target.into()))?;
    if !col.class().is_numeric() {
        return Err(MappingError::Spec(format!("target '{target}' must be numeric")));
    }
    let v = col.as_f64().expect("numeric column");
    rows.iter()
        .map(|&i| v[i].ok_or_else(|| MappingError::Spec(format!("row {}: target is missing", i + 1))))
        .collect()
}
