use std::collections::BTreeMap;
use std::fmt::Write;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::{Column, DataError, ValidatedDataset, VarClass};

/// Optional stratification for [`describe_dataset`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stratify {
    pub by_group: bool,
    pub by_round: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NumericStats {
    pub mean: f64,
    /// Sample standard deviation; undefined for fewer than two values.
    pub sd: Option<f64>,
    pub min: f64,
    pub max: f64,
    pub histogram: Histogram,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableSummary {
    pub variable: String,
    pub class: VarClass,
    pub n: usize,
    pub n_missing: usize,
    pub numeric: Option<NumericStats>,
    pub levels: Option<IndexMap<String, usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratumSummary {
    pub group: Option<String>,
    pub round: Option<String>,
    pub n_rows: usize,
    pub variables: Vec<VariableSummary>,
}

/// Per-variable descriptive statistics: the whole dataset first, then one
/// entry per requested stratum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescriptiveSummary {
    pub strata: Vec<StratumSummary>,
}

/// Number of histogram bins used for `n` values.
pub fn bin_count(n: usize) -> usize {
    ((n as f64).sqrt().ceil() as usize).clamp(1, 20)
}

pub(crate) fn histogram(values: &[f64]) -> Histogram {
    let (lo, hi) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    if values.is_empty() {
        return Histogram { edges: vec![], counts: vec![] };
    }
    if lo == hi {
        return Histogram { edges: vec![lo, hi], counts: vec![values.len()] };
    }
    let bins = bin_count(values.len());
    let width = (hi - lo) / bins as f64;
    let edges = (0..=bins).map(|i| if i == bins { hi } else { lo + width * i as f64 }).collect();
    let mut counts = vec![0; bins];
    for &x in values {
        let idx = (((x - lo) / width).floor() as usize).min(bins - 1);
        counts[idx] += 1;
    }
    Histogram { edges, counts }
}

pub(crate) fn numeric_stats(values: &[f64]) -> Option<NumericStats> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = (values.len() > 1)
        .then(|| (values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt());
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Some(NumericStats { mean, sd, min, max, histogram: histogram(values) })
}

fn summarize(ds: &ValidatedDataset, name: &str, col: &Column, rows: &[usize]) -> VariableSummary {
    let n_missing = rows.iter().filter(|&&i| col.is_missing(i)).count();
    let n = rows.len() - n_missing;
    let (numeric, levels) = match col {
        Column::Integer(_) | Column::Double(_) => {
            let all = col.as_f64().expect("numeric column");
            let vals: Vec<f64> = rows.iter().filter_map(|&i| all[i]).collect();
            (numeric_stats(&vals), None)
        }
        Column::Categorical(v) => {
            let mut counts: IndexMap<String, usize> = ds
                .dictionary()
                .get(name)
                .and_then(|e| e.allowed_set.clone())
                .unwrap_or_default()
                .into_iter()
                .map(|l| (l, 0))
                .collect();
            for &i in rows {
                if let Some(l) = &v[i] {
                    *counts.entry(l.clone()).or_insert(0) += 1;
                }
            }
            (None, Some(counts))
        }
        _ => (None, None),
    };
    VariableSummary { variable: name.to_string(), class: col.class(), n, n_missing, numeric, levels }
}

fn stratum(ds: &ValidatedDataset, group: Option<String>, round: Option<String>, rows: &[usize]) -> StratumSummary {
    StratumSummary {
        group,
        round,
        n_rows: rows.len(),
        variables: ds.columns().map(|(name, col)| summarize(ds, name, col, rows)).collect(),
    }
}

/// Descriptive statistics over non-missing values, optionally stratified by
/// the metadata group and/or round variables.
pub fn describe_dataset(ds: &ValidatedDataset, stratify: Stratify) -> Result<DescriptiveSummary, DataError> {
    let meta = ds.metadata();
    let key_col = |flag: bool, var: &Option<String>, what: &str| -> Result<Option<Vec<Option<String>>>, DataError> {
        if !flag {
            return Ok(None);
        }
        let v = var.as_ref().ok_or_else(|| DataError::Stratify(format!("{what}_var is not set in the dataset metadata")))?;
        Ok(ds.text(v))
    };
    let groups = key_col(stratify.by_group, &meta.group_var, "group")?;
    let rounds = key_col(stratify.by_round, &meta.round_var, "round")?;

    let all: Vec<usize> = (0..ds.n_rows()).collect();
    let mut strata = vec![stratum(ds, None, None, &all)];
    if groups.is_some() || rounds.is_some() {
        // numeric-aware ordering so round 10 sorts after round 9
        let mut buckets: BTreeMap<(Option<SortKey>, Option<SortKey>), Vec<usize>> = BTreeMap::new();
        for i in 0..ds.n_rows() {
            let g = groups.as_ref().map(|g| SortKey::new(g[i].clone()));
            let r = rounds.as_ref().map(|r| SortKey::new(r[i].clone()));
            buckets.entry((g, r)).or_default().push(i);
        }
        for ((g, r), rows) in buckets {
            strata.push(stratum(ds, g.map(SortKey::label), r.map(SortKey::label), &rows));
        }
    }
    Ok(DescriptiveSummary { strata })
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct SortKey(Option<i64>, Option<String>);

impl SortKey {
    fn new(s: Option<String>) -> Self {
        let num = s.as_deref().and_then(|s| s.parse().ok());
        SortKey(num, s)
    }

    fn label(self) -> String {
        self.1.unwrap_or_else(|| "(missing)".into())
    }
}

fn fmt_num(x: f64) -> String {
    if x.fract() == 0.0 && x.abs() < 1e15 {
        format!("{x:.0}")
    } else {
        format!("{x:.3}")
    }
}

impl DescriptiveSummary {
    pub fn to_json(&self) -> String {
        crate::json::to_canonical_string(self).expect("summary serializes")
    }

    /// Aligned plain-text tables, one block per stratum.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for s in &self.strata {
            let title = match (&s.group, &s.round) {
                (None, None) => "All rows".to_string(),
                (g, r) => [g.as_ref().map(|g| format!("group={g}")), r.as_ref().map(|r| format!("round={r}"))]
                    .into_iter()
                    .flatten()
                    .collect::<Vec<_>>()
                    .join(", "),
            };
            let _ = writeln!(out, "{title} (n={})", s.n_rows);
            let header = ["variable", "class", "n", "missing", "mean", "sd", "min", "max", "levels"];
            let mut rows: Vec<Vec<String>> = vec![header.iter().map(|h| h.to_string()).collect()];
            for v in &s.variables {
                let (mean, sd, min, max) = match &v.numeric {
                    Some(st) => (
                        format!("{:.3}", st.mean),
                        st.sd.map_or("NA".into(), |x| format!("{x:.3}")),
                        fmt_num(st.min),
                        fmt_num(st.max),
                    ),
                    None => Default::default(),
                };
                let levels = v
                    .levels
                    .as_ref()
                    .map(|l| l.iter().map(|(k, c)| format!("{k}:{c}")).collect::<Vec<_>>().join(" "))
                    .unwrap_or_default();
                rows.push(vec![
                    v.variable.clone(),
                    v.class.to_string(),
                    v.n.to_string(),
                    v.n_missing.to_string(),
                    mean,
                    sd,
                    min,
                    max,
                    levels,
                ]);
            }
            out.push_str(&align(&rows));
            out.push('\n');
        }
        out
    }
}

/// Left-aligns text columns, right-aligns everything that parses as a number.
pub(crate) fn align(rows: &[Vec<String>]) -> String {
    let ncol = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> =
        (0..ncol).map(|j| rows.iter().filter_map(|r| r.get(j)).map(|c| c.chars().count()).max().unwrap_or(0)).collect();
    let mut out = String::new();
    for r in rows {
        let cells: Vec<String> = r
            .iter()
            .enumerate()
            .map(|(j, c)| {
                if c.parse::<f64>().is_ok() {
                    format!("{c:>w$}", w = widths[j])
                } else {
                    format!("{c:<w$}", w = widths[j])
                }
            })
            .collect();
        out.push_str(cells.join("  ").trim_end());
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{ingest_table, load_dictionary, validate_dataset, DatasetMetadata};

    fn ds(x: &[&str]) -> ValidatedDataset {
        let dict = load_dictionary(
            "variable,class,min,max,allowed_set,description\nid,integer,,,,\nx,double,,,,\ng,categorical,,,a|b,\nr,integer,1,12,,\n",
        )
        .unwrap();
        let mut src = String::from("id,x,g,r\n");
        for (i, v) in x.iter().enumerate() {
            let g = if i % 2 == 0 { "a" } else { "b" };
            src.push_str(&format!("{i},{v},{g},{}\n", if i < 2 { 1 } else { 10 }));
        }
        let raw = ingest_table(&src, "NA").unwrap();
        validate_dataset(&raw, &dict, &DatasetMetadata::new("id").with_group("g").with_round("r")).unwrap()
    }

    fn var<'a>(s: &'a StratumSummary, name: &str) -> &'a VariableSummary {
        s.variables.iter().find(|v| v.variable == name).unwrap()
    }

    #[test]
    fn mean_sd_min_max() {
        let s = describe_dataset(&ds(&["1", "2", "3"]), Stratify::default()).unwrap();
        let st = var(&s.strata[0], "x").numeric.clone().unwrap();
        assert_eq!((st.mean, st.sd, st.min, st.max), (2.0, Some(1.0), 1.0, 3.0));
    }

    #[test]
    fn missing_excluded() {
        let s = describe_dataset(&ds(&["5", "NA", "5"]), Stratify::default()).unwrap();
        let v = var(&s.strata[0], "x");
        assert_eq!((v.n, v.n_missing), (2, 1));
        assert_eq!(v.numeric.as_ref().unwrap().mean, 5.0);
    }

    #[test]
    fn constant_column_single_bin() {
        let s = describe_dataset(&ds(&["4", "4", "4", "4"]), Stratify::default()).unwrap();
        let st = var(&s.strata[0], "x").numeric.clone().unwrap();
        assert_eq!(st.sd, Some(0.0));
        assert_eq!(st.histogram.counts.iter().filter(|&&c| c > 0).count(), 1);
        assert_eq!(st.histogram.counts.iter().sum::<usize>(), 4);
    }

    #[test]
    fn histogram_bin_rule() {
        assert_eq!(bin_count(1), 1);
        assert_eq!(bin_count(10), 4);
        assert_eq!(bin_count(400), 20);
        assert_eq!(bin_count(10_000), 20);
        let h = histogram(&(0..10).map(f64::from).collect::<Vec<_>>());
        assert_eq!(h.counts.len(), 4);
        assert_eq!(h.counts.iter().sum::<usize>(), 10);
        assert_eq!(*h.edges.last().unwrap(), 9.0);
    }

    #[test]
    fn stratified_counts_add_up() {
        let d = ds(&["1", "NA", "3", "4", "5"]);
        let s = describe_dataset(&d, Stratify { by_group: true, by_round: true }).unwrap();
        assert_eq!(s.strata.len(), 5);
        for st in &s.strata {
            for v in &st.variables {
                assert_eq!(v.n + v.n_missing, st.n_rows);
            }
        }
        // rounds order numerically: 1 before 10
        assert_eq!(s.strata[1].round.as_deref(), Some("1"));
        assert_eq!(var(&s.strata[0], "g").levels.as_ref().unwrap()["a"], 3);
    }

    #[test]
    fn stratify_without_metadata_fails() {
        let d = ds(&["1", "2"]);
        let meta = DatasetMetadata::new("id");
        let d = validate_dataset(&d.to_raw(), d.dictionary(), &meta).unwrap();
        assert!(describe_dataset(&d, Stratify { by_group: true, by_round: false }).is_err());
    }

    #[test]
    fn text_output_is_aligned() {
        let t = describe_dataset(&ds(&["1", "2", "3"]), Stratify::default()).unwrap().to_text();
        assert!(t.starts_with("All rows (n=3)\nvariable"));
        let lines: Vec<&str> = t.lines().skip(1).take(5).collect();
        let col = lines[0].find("class").unwrap();
        assert!(lines.iter().all(|l| l.len() > col));
    }
}
