use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::DataError;

pub const DEFAULT_MISSING_MARKER: &str = "NA";

/// Untyped rectangular table; `None` cells are missing.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RawTable {
    columns: IndexMap<String, Vec<Option<String>>>,
    n_rows: usize,
}

impl RawTable {
    /// Builds a table from named columns of equal length.
    pub fn from_columns(columns: Vec<(String, Vec<Option<String>>)>) -> Result<Self, DataError> {
        let n_rows = columns.first().map_or(0, |(_, c)| c.len());
        let mut map = IndexMap::with_capacity(columns.len());
        for (name, col) in columns {
            if col.len() != n_rows {
                return Err(DataError::Format(format!(
                    "column '{name}' has {} values, expected {n_rows}",
                    col.len()
                )));
            }
            if map.insert(name.clone(), col).is_some() {
                return Err(DataError::Format(format!("duplicate column '{name}'")));
            }
        }
        Ok(Self { columns: map, n_rows })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn column_names(&self) -> impl Iterator<Item = &str> {
        self.columns.keys().map(String::as_str)
    }

    pub fn column(&self, name: &str) -> Option<&[Option<String>]> {
        self.columns.get(name).map(Vec::as_slice)
    }

    pub fn columns(&self) -> impl Iterator<Item = (&str, &[Option<String>])> {
        self.columns.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    /// Replaces one cell. Row is 0-based.
    pub fn set(&mut self, column: &str, row: usize, value: Option<String>) -> bool {
        match self.columns.get_mut(column).and_then(|c| c.get_mut(row)) {
            Some(cell) => {
                *cell = value;
                true
            }
            None => false,
        }
    }

    /// RFC-4180 CSV with a header row; missing cells are written as `missing_marker`.
    pub fn to_csv(&self, missing_marker: &str) -> String {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(vec![]);
        w.write_record(self.columns.keys()).expect("in-memory write");
        for i in 0..self.n_rows {
            w.write_record(self.columns.values().map(|c| c[i].as_deref().unwrap_or(missing_marker)))
                .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
    }
}

/// Parses CSV text with a header row. Cells equal to `missing_marker`
/// become missing; every other cell is kept as text.
pub fn ingest_table(source: &str, missing_marker: &str) -> Result<RawTable, DataError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(source.as_bytes());
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| DataError::Csv(e.to_string()))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if header.is_empty() || header.iter().all(String::is_empty) {
        return Err(DataError::Csv("missing header row".into()));
    }
    let mut cols: Vec<Vec<Option<String>>> = vec![Vec::new(); header.len()];
    for rec in rdr.records() {
        let rec = rec.map_err(|e| DataError::Csv(e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != header.len() {
            return Err(DataError::Ragged { line, expected: header.len(), got: rec.len() });
        }
        for (col, cell) in cols.iter_mut().zip(rec.iter()) {
            col.push((cell != missing_marker).then(|| cell.to_string()));
        }
    }
    RawTable::from_columns(header.into_iter().zip(cols).collect())
}
