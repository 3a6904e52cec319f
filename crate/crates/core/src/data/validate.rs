use std::collections::HashSet;
use std::fmt;

use chrono::NaiveDate;
use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::{DataDictionary, DictionaryEntry, RawTable, VarClass};
use crate::hash::FieldHasher;

/// Which columns identify people, groups and data collection rounds.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DatasetMetadata {
    pub uid_var: String,
    pub round_var: Option<String>,
    pub group_var: Option<String>,
    #[serde(default)]
    pub label_map: IndexMap<String, String>,
}

impl DatasetMetadata {
    pub fn new(uid_var: &str) -> Self {
        Self { uid_var: uid_var.into(), ..Self::default() }
    }

    pub fn with_round(mut self, round_var: &str) -> Self {
        self.round_var = Some(round_var.into());
        self
    }

    pub fn with_group(mut self, group_var: &str) -> Self {
        self.group_var = Some(group_var.into());
        self
    }
}

/// A typed column. Missing cells are `None`.
#[derive(Debug, Clone, PartialEq)]
pub enum Column {
    Integer(Vec<Option<i64>>),
    Double(Vec<Option<f64>>),
    Categorical(Vec<Option<String>>),
    Date(Vec<Option<NaiveDate>>),
    Text(Vec<Option<String>>),
}

impl Column {
    pub fn len(&self) -> usize {
        match self {
            Column::Integer(v) => v.len(),
            Column::Double(v) => v.len(),
            Column::Categorical(v) | Column::Text(v) => v.len(),
            Column::Date(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn class(&self) -> VarClass {
        match self {
            Column::Integer(_) => VarClass::Integer,
            Column::Double(_) => VarClass::Double,
            Column::Categorical(_) => VarClass::Categorical,
            Column::Date(_) => VarClass::Date,
            Column::Text(_) => VarClass::Text,
        }
    }

    /// Canonical text of one cell; parsing it back under the same class
    /// yields the same value.
    pub fn cell_text(&self, row: usize) -> Option<String> {
        match self {
            Column::Integer(v) => v[row].map(|x| x.to_string()),
            Column::Double(v) => v[row].map(|x| x.to_string()),
            Column::Categorical(v) | Column::Text(v) => v[row].clone(),
            Column::Date(v) => v[row].map(|d| d.format("%Y-%m-%d").to_string()),
        }
    }

    pub fn is_missing(&self, row: usize) -> bool {
        match self {
            Column::Integer(v) => v[row].is_none(),
            Column::Double(v) => v[row].is_none(),
            Column::Categorical(v) | Column::Text(v) => v[row].is_none(),
            Column::Date(v) => v[row].is_none(),
        }
    }

    /// Numeric view for integer and double columns; dates count days from
    /// 0001-01-01.
    pub fn as_f64(&self) -> Option<Vec<Option<f64>>> {
        match self {
            Column::Integer(v) => Some(v.iter().map(|x| x.map(|x| x as f64)).collect()),
            Column::Double(v) => Some(v.clone()),
            Column::Date(v) => Some(v.iter().map(|d| d.map(|d| day_number(d) as f64)).collect()),
            _ => None,
        }
    }
}

pub(crate) fn day_number(d: NaiveDate) -> i64 {
    use chrono::Datelike;
    d.num_days_from_ce() as i64
}

/// All dictionary violations found in one validation pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationFailure {
    pub issues: Vec<String>,
}

impl fmt::Display for ValidationFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.issues.as_slice() {
            [one] => f.write_str(one),
            many => {
                write!(f, "{} validation errors:", many.len())?;
                for m in many {
                    write!(f, "\n  {m}")?;
                }
                Ok(())
            }
        }
    }
}

impl std::error::Error for ValidationFailure {}

/// A records table whose every cell satisfies its dictionary entry.
/// Immutable; construct with [`validate_dataset`].
#[derive(Debug, Clone, PartialEq)]
pub struct ValidatedDataset {
    columns: IndexMap<String, Column>,
    n_rows: usize,
    dictionary: DataDictionary,
    metadata: DatasetMetadata,
    validation_stamp: String,
}

#[derive(Serialize, Deserialize)]
struct DatasetFile {
    metadata: DatasetMetadata,
    dictionary: DataDictionary,
    columns: IndexMap<String, Vec<Option<String>>>,
    validation_stamp: String,
}

impl ValidatedDataset {
    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn dictionary(&self) -> &DataDictionary {
        &self.dictionary
    }

    pub fn metadata(&self) -> &DatasetMetadata {
        &self.metadata
    }

    pub fn validation_stamp(&self) -> &str {
        &self.validation_stamp
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.get(name)
    }

    pub fn columns(&self) -> impl Iterator<Item = (&str, &Column)> {
        self.columns.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn column_names(&self) -> impl Iterator<Item = &str> {
        self.columns.keys().map(String::as_str)
    }

    pub fn numeric(&self, name: &str) -> Option<Vec<Option<f64>>> {
        self.columns.get(name).and_then(Column::as_f64)
    }

    /// Canonical text of every cell in a column.
    pub fn text(&self, name: &str) -> Option<Vec<Option<String>>> {
        self.columns.get(name).map(|c| (0..self.n_rows).map(|i| c.cell_text(i)).collect())
    }

    /// Person identifiers as text.
    pub fn uids(&self) -> Vec<Option<String>> {
        self.text(&self.metadata.uid_var).expect("uid column exists")
    }

    /// Canonical untyped form; `validate_dataset(ds.to_raw(), ..)` reproduces `ds`.
    pub fn to_raw(&self) -> RawTable {
        let cols = self
            .columns
            .iter()
            .map(|(k, c)| (k.clone(), (0..self.n_rows).map(|i| c.cell_text(i)).collect()))
            .collect();
        RawTable::from_columns(cols).expect("columns are rectangular")
    }

    /// Appends columns (with their dictionary entries) and revalidates.
    pub fn with_columns(&self, extra: Vec<(DictionaryEntry, Vec<Option<String>>)>) -> Result<Self, crate::Error> {
        let dictionary = self.dictionary.with_entries(extra.iter().map(|(e, _)| e.clone()))?;
        let mut cols: Vec<(String, Vec<Option<String>>)> =
            self.to_raw().columns().map(|(k, v)| (k.to_string(), v.to_vec())).collect();
        cols.extend(extra.into_iter().map(|(e, v)| (e.variable, v)));
        let raw = RawTable::from_columns(cols)?;
        Ok(validate_dataset(&raw, &dictionary, &self.metadata)?)
    }

    pub fn to_json(&self) -> String {
        let file = DatasetFile {
            metadata: self.metadata.clone(),
            dictionary: self.dictionary.clone(),
            columns: self.to_raw().columns().map(|(k, v)| (k.to_string(), v.to_vec())).collect(),
            validation_stamp: self.validation_stamp.clone(),
        };
        serde_json::to_string_pretty(&file).expect("dataset serializes")
    }

    /// Loads a dataset written by [`to_json`](Self::to_json), revalidating it
    /// and checking the stored stamp.
    pub fn from_json(text: &str) -> Result<Self, crate::Error> {
        let file: DatasetFile = serde_json::from_str(text)?;
        let raw = RawTable::from_columns(file.columns.into_iter().collect())?;
        let dictionary = DataDictionary::new(file.dictionary.entries().to_vec())?;
        let ds = validate_dataset(&raw, &dictionary, &file.metadata)?;
        if ds.validation_stamp != file.validation_stamp {
            return Err(super::DataError::Format(format!(
                "validation stamp mismatch: file says {}, content hashes to {}",
                file.validation_stamp, ds.validation_stamp
            ))
            .into());
        }
        Ok(ds)
    }
}

fn parse_cell(entry: &DictionaryEntry, raw: &str, row: usize, issues: &mut Vec<String>) -> Option<Column1> {
    let var = &entry.variable;
    let in_range = |x: f64| entry.min.is_none_or(|m| x >= m) && entry.max.is_none_or(|m| x <= m);
    match entry.class {
        VarClass::Integer => match raw.trim().parse::<i64>() {
            Ok(x) if in_range(x as f64) => Some(Column1::Int(x)),
            Ok(x) => {
                issues.push(format!("{var}: value {x} at row {row} outside {}", entry.range_text()));
                None
            }
            Err(_) => {
                issues.push(format!(
                    "{var}: value '{raw}' at row {row} is not an integer (permitted {})",
                    entry.range_text()
                ));
                None
            }
        },
        VarClass::Double => match raw.trim().parse::<f64>() {
            Ok(x) if x.is_finite() && in_range(x) => Some(Column1::Dbl(x)),
            Ok(x) if x.is_finite() => {
                issues.push(format!("{var}: value {x} at row {row} outside {}", entry.range_text()));
                None
            }
            _ => {
                issues.push(format!(
                    "{var}: value '{raw}' at row {row} is not a finite number (permitted {})",
                    entry.range_text()
                ));
                None
            }
        },
        VarClass::Categorical => {
            let allowed = entry.allowed_set.as_deref().unwrap_or_default();
            if allowed.iter().any(|a| a == raw) {
                Some(Column1::Str(raw.to_string()))
            } else {
                issues.push(format!("{var}: value '{raw}' at row {row} not in allowed set {}", entry.allowed_text()));
                None
            }
        }
        VarClass::Date => match NaiveDate::parse_from_str(raw.trim(), "%Y-%m-%d") {
            Ok(d) => Some(Column1::Date(d)),
            Err(_) => {
                issues.push(format!("{var}: value '{raw}' at row {row} is not a date (permitted YYYY-MM-DD)"));
                None
            }
        },
        VarClass::Text => Some(Column1::Str(raw.to_string())),
    }
}

enum Column1 {
    Int(i64),
    Dbl(f64),
    Str(String),
    Date(NaiveDate),
}

fn typed_column(entry: &DictionaryEntry, cells: &[Option<String>], issues: &mut Vec<String>) -> Column {
    let parsed: Vec<Option<Column1>> = cells
        .iter()
        .enumerate()
        .map(|(i, c)| c.as_deref().and_then(|raw| parse_cell(entry, raw, i + 1, issues)))
        .collect();
    macro_rules! collect {
        ($variant:ident, $inner:ident) => {
            Column::$variant(
                parsed.into_iter().map(|c| match c {
                    Some(Column1::$inner(x)) => Some(x),
                    _ => None,
                }).collect(),
            )
        };
    }
    match entry.class {
        VarClass::Integer => collect!(Integer, Int),
        VarClass::Double => collect!(Double, Dbl),
        VarClass::Categorical => collect!(Categorical, Str),
        VarClass::Date => collect!(Date, Date),
        VarClass::Text => collect!(Text, Str),
    }
}

fn stamp(columns: &IndexMap<String, Column>, n_rows: usize, dictionary: &DataDictionary) -> String {
    let mut h = FieldHasher::new();
    h.str(&serde_json::to_string(dictionary).expect("dictionary serializes"));
    for (name, col) in columns {
        h.str(name).str(col.class().as_str());
        for i in 0..n_rows {
            match col.cell_text(i) {
                Some(s) => h.field(&[1]).str(&s),
                None => h.field(&[0]),
            };
        }
    }
    h.finish()
}

/// Checks every cell against the dictionary and returns a typed, stamped
/// dataset. All violations are collected before failing.
pub fn validate_dataset(
    table: &RawTable,
    dictionary: &DataDictionary,
    metadata: &DatasetMetadata,
) -> Result<ValidatedDataset, ValidationFailure> {
    let mut issues = Vec::new();
    let names: HashSet<&str> = table.column_names().collect();
    let meta_vars = [("uid_var", Some(&metadata.uid_var)), ("round_var", metadata.round_var.as_ref()), ("group_var", metadata.group_var.as_ref())];
    for (role, var) in meta_vars {
        if let Some(v) = var {
            if !names.contains(v.as_str()) {
                issues.push(format!("metadata {role} '{v}' is not a column of the table"));
            }
        }
    }
    let mut columns = IndexMap::new();
    for (name, cells) in table.columns() {
        match dictionary.get(name) {
            None => issues.push(format!("no dictionary entry for column '{name}'")),
            Some(entry) => {
                columns.insert(name.to_string(), typed_column(entry, cells, &mut issues));
            }
        }
    }
    // Records are person-rounds: a uid may repeat across rounds, and only a
    // repeated (uid, round) pair is an error, checked when rounds are declared.
    if let Some(uid) = columns.get(&metadata.uid_var) {
        let rounds = metadata.round_var.as_ref().and_then(|r| columns.get(r));
        let mut seen = HashSet::new();
        for i in 0..table.n_rows() {
            match (uid.cell_text(i), rounds) {
                (None, _) => issues.push(format!("{}: missing person identifier at row {}", metadata.uid_var, i + 1)),
                (Some(u), Some(rounds)) => {
                    let r = rounds.cell_text(i);
                    if r.is_some() && !seen.insert((u.clone(), r.clone())) {
                        let r = r.unwrap_or_default();
                        issues.push(format!("{}: duplicate identifier '{u}' in round {r} at row {}", metadata.uid_var, i + 1));
                    }
                }
                (Some(_), None) => {}
            }
        }
    }
    if !issues.is_empty() {
        return Err(ValidationFailure { issues });
    }
    let validation_stamp = stamp(&columns, table.n_rows(), dictionary);
    Ok(ValidatedDataset {
        columns,
        n_rows: table.n_rows(),
        dictionary: dictionary.clone(),
        metadata: metadata.clone(),
        validation_stamp,
    })
}
