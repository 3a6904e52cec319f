use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::PredictError;
use crate::data::ValidatedDataset;
use crate::json::format_f64;

pub const DAYS_PER_YEAR: f64 = 365.25;

/// Trapezoid QALYs between two utility observations `days` apart.
pub fn qaly(u_start: f64, u_end: f64, days: f64) -> f64 {
    (u_start + u_end) / 2.0 * (days / DAYS_PER_YEAR)
}

/// Which columns and rounds to pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QalySpec {
    pub utility: String,
    /// Date column, or a numeric column of day offsets.
    pub time_var: String,
    pub start_round: String,
    pub end_round: String,
}

impl QalySpec {
    pub fn new(utility: &str, time_var: &str) -> Self {
        Self { utility: utility.into(), time_var: time_var.into(), start_round: "1".into(), end_round: "2".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QalyRecord {
    pub uid: String,
    pub u_start: f64,
    pub u_end: f64,
    /// Day numbers (dates) or offsets.
    pub t_start: f64,
    pub t_end: f64,
    pub qalys: f64,
}

impl QalyRecord {
    pub fn days(&self) -> f64 {
        self.t_end - self.t_start
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct QalyResult {
    pub records: Vec<QalyRecord>,
    /// Uids lacking a usable observation at either round.
    pub skipped: Vec<String>,
}

/// Pairs each uid's start and end rounds. Uids are reported in order of
/// first appearance.
pub fn compute_qalys(ds: &ValidatedDataset, spec: &QalySpec) -> Result<QalyResult, PredictError> {
    let round_var = ds
        .metadata()
        .round_var
        .clone()
        .ok_or_else(|| PredictError::Spec("dataset metadata names no round variable".into()))?;
    let rounds = ds.column(&round_var).ok_or_else(|| PredictError::Spec(format!("round column '{round_var}' not found")))?;
    let numeric = |name: &str| -> Result<Vec<Option<f64>>, PredictError> {
        let col = ds.column(name).ok_or_else(|| PredictError::Spec(format!("column '{name}' not found")))?;
        col.as_f64().ok_or_else(|| PredictError::Spec(format!("column '{name}' is {}, expected numeric or date", col.class())))
    };
    let utility = numeric(&spec.utility)?;
    let time = numeric(&spec.time_var)?;
    let uids = ds.uids();

    // uid -> (start row, end row)
    let mut pairs: IndexMap<String, (Option<usize>, Option<usize>)> = IndexMap::new();
    for (i, uid) in uids.iter().enumerate() {
        let Some(uid) = uid else { continue };
        let slot = pairs.entry(uid.clone()).or_default();
        match rounds.cell_text(i) {
            Some(r) if r == spec.start_round => slot.0 = Some(i),
            Some(r) if r == spec.end_round => slot.1 = Some(i),
            _ => {}
        }
    }
    let mut out = QalyResult::default();
    for (uid, rows) in pairs {
        let obs = |row: Option<usize>| row.and_then(|i| Some((utility[i]?, time[i]?)));
        let (Some((u_start, t_start)), Some((u_end, t_end))) = (obs(rows.0), obs(rows.1)) else {
            out.skipped.push(uid);
            continue;
        };
        if t_end <= t_start {
            return Err(PredictError::TimeOrder { uid, t_start, t_end });
        }
        out.records.push(QalyRecord { uid, u_start, u_end, t_start, t_end, qalys: qaly(u_start, u_end, t_end - t_start) });
    }
    Ok(out)
}

/// `uid,u_start,u_end,days,qalys`
pub fn qaly_csv(records: &[QalyRecord]) -> String {
    let mut out = String::from("uid,u_start,u_end,days,qalys\n");
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.uid,
            format_f64(r.u_start),
            format_f64(r.u_end),
            format_f64(r.days()),
            format_f64(r.qalys)
        ));
    }
    out
}
