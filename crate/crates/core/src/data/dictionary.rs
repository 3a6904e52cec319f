use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::DataError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VarClass {
    Integer,
    Double,
    Categorical,
    Date,
    Text,
}

impl VarClass {
    pub fn is_numeric(self) -> bool {
        matches!(self, VarClass::Integer | VarClass::Double)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            VarClass::Integer => "integer",
            VarClass::Double => "double",
            VarClass::Categorical => "categorical",
            VarClass::Date => "date",
            VarClass::Text => "text",
        }
    }
}

impl fmt::Display for VarClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for VarClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "integer" => Ok(VarClass::Integer),
            "double" => Ok(VarClass::Double),
            "categorical" => Ok(VarClass::Categorical),
            "date" => Ok(VarClass::Date),
            "text" => Ok(VarClass::Text),
            other => Err(format!("unknown class '{other}' (expected integer, double, categorical, date or text)")),
        }
    }
}

/// Allowable values and class of one variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DictionaryEntry {
    pub variable: String,
    pub class: VarClass,
    pub min: Option<f64>,
    pub max: Option<f64>,
    pub allowed_set: Option<Vec<String>>,
    pub description: String,
}

impl DictionaryEntry {
    pub fn numeric(variable: &str, class: VarClass, min: Option<f64>, max: Option<f64>, description: &str) -> Self {
        Self {
            variable: variable.into(),
            class,
            min,
            max,
            allowed_set: None,
            description: description.into(),
        }
    }

    /// Human-readable permitted range, e.g. `[12, 25]` or `[0, +inf)`.
    pub fn range_text(&self) -> String {
        let lo = self.min.map_or("(-inf".to_string(), |m| format!("[{m}"));
        let hi = self.max.map_or("+inf)".to_string(), |m| format!("{m}]"));
        format!("{lo}, {hi}")
    }

    pub fn allowed_text(&self) -> String {
        format!("{{{}}}", self.allowed_set.as_deref().unwrap_or_default().join(", "))
    }

    fn check(&self) -> Result<(), String> {
        if self.variable.trim().is_empty() {
            return Err("variable name is empty".into());
        }
        match self.class {
            VarClass::Categorical => {
                if self.min.is_some() || self.max.is_some() {
                    return Err(format!("{}: categorical variables cannot have min/max", self.variable));
                }
                if self.allowed_set.as_ref().is_none_or(|s| s.is_empty()) {
                    return Err(format!("{}: categorical variables need a nonempty allowed_set", self.variable));
                }
            }
            _ => {
                if self.allowed_set.is_some() {
                    return Err(format!("{}: allowed_set is only valid for categorical variables", self.variable));
                }
                if !self.class.is_numeric() && (self.min.is_some() || self.max.is_some()) {
                    return Err(format!("{}: min/max only apply to integer and double variables", self.variable));
                }
            }
        }
        Ok(())
    }
}

/// Per-variable allowable values, in file order.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DataDictionary {
    entries: Vec<DictionaryEntry>,
}

impl DataDictionary {
    /// Builds a dictionary, enforcing unique names and per-class rules.
    pub fn new(entries: Vec<DictionaryEntry>) -> Result<Self, DataError> {
        let mut seen = HashSet::new();
        for (i, e) in entries.iter().enumerate() {
            let line = i as u64 + 2;
            e.check().map_err(|message| DataError::DictionaryRow { line, message })?;
            if let (Some(min), Some(max)) = (e.min, e.max) {
                if min > max {
                    return Err(DataError::DictionaryRange { variable: e.variable.clone(), min, max });
                }
            }
            if !seen.insert(e.variable.as_str()) {
                return Err(DataError::DictionaryRow { line, message: format!("duplicate variable '{}'", e.variable) });
            }
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[DictionaryEntry] {
        &self.entries
    }

    pub fn get(&self, variable: &str) -> Option<&DictionaryEntry> {
        self.entries.iter().find(|e| e.variable == variable)
    }

    pub(crate) fn with_entries(&self, extra: impl IntoIterator<Item = DictionaryEntry>) -> Result<Self, DataError> {
        let mut entries = self.entries.clone();
        entries.extend(extra);
        Self::new(entries)
    }

    /// Writes the dictionary in the same CSV layout [`load_dictionary`] reads.
    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(vec![]);
        w.write_record(HEADER).expect("in-memory write");
        for e in &self.entries {
            let num = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
            w.write_record([
                e.variable.clone(),
                e.class.to_string(),
                num(e.min),
                num(e.max),
                e.allowed_set.as_ref().map(|s| s.join("|")).unwrap_or_default(),
                e.description.clone(),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
    }
}

const HEADER: [&str; 6] = ["variable", "class", "min", "max", "allowed_set", "description"];

/// Parses dictionary CSV with columns
/// `variable,class,min,max,allowed_set,description`; `allowed_set` is
/// pipe-delimited.
pub fn load_dictionary(source: &str) -> Result<DataDictionary, DataError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(source.as_bytes());
    let header = rdr.headers().map_err(|e| DataError::Csv(e.to_string()))?.clone();
    let cols: Vec<&str> = header.iter().map(str::trim).collect();
    if cols != HEADER {
        return Err(DataError::DictionaryRow {
            line: 1,
            message: format!("header must be '{}', got '{}'", HEADER.join(","), cols.join(",")),
        });
    }
    let mut entries = Vec::new();
    let mut seen = HashSet::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| DataError::Csv(e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        let row_err = |message: String| DataError::DictionaryRow { line, message };
        if rec.len() != HEADER.len() {
            return Err(row_err(format!("expected {} fields, got {}", HEADER.len(), rec.len())));
        }
        let variable = rec[0].trim().to_string();
        let class: VarClass = rec[1].parse().map_err(row_err)?;
        let number = |s: &str, what: &str| -> Result<Option<f64>, DataError> {
            let s = s.trim();
            if s.is_empty() {
                return Ok(None);
            }
            s.parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .map(Some)
                .ok_or_else(|| DataError::DictionaryRow { line, message: format!("{variable}: {what} '{s}' is not a number") })
        };
        let min = number(&rec[2], "min")?;
        let max = number(&rec[3], "max")?;
        let allowed = rec[4].trim();
        let allowed_set = (!allowed.is_empty()).then(|| allowed.split('|').map(|s| s.trim().to_string()).collect());
        let entry = DictionaryEntry { variable, class, min, max, allowed_set, description: rec[5].trim().to_string() };
        if let (Some(min), Some(max)) = (entry.min, entry.max) {
            if min > max {
                return Err(DataError::DictionaryRange { variable: entry.variable, min, max });
            }
        }
        entry.check().map_err(|m| DataError::DictionaryRow { line, message: m })?;
        if !seen.insert(entry.variable.clone()) {
            return Err(DataError::DictionaryRow { line, message: format!("duplicate variable '{}'", entry.variable) });
        }
        entries.push(entry);
    }
    Ok(DataDictionary { entries })
}
