use std::sync::Arc;

use indexmap::IndexMap;
use rayon::prelude::*;

use super::instrument::{CustomScorer, Engine, InstrumentDefinition};
use super::ScoringError;
use crate::data::{Column, DictionaryEntry, ValidatedDataset, VarClass};

/// A dataset paired with an instrument whose items it can supply.
#[derive(Clone)]
pub struct InstrumentBinding {
    dataset: ValidatedDataset,
    instrument: InstrumentDefinition,
    custom: Option<Arc<dyn CustomScorer>>,
}

impl std::fmt::Debug for InstrumentBinding {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("InstrumentBinding")
            .field("instrument", &self.instrument.name)
            .field("rows", &self.dataset.n_rows())
            .field("custom", &self.custom.as_ref().map(|c| c.name().to_string()))
            .finish()
    }
}

impl InstrumentBinding {
    pub fn dataset(&self) -> &ValidatedDataset {
        &self.dataset
    }

    pub fn instrument(&self) -> &InstrumentDefinition {
        &self.instrument
    }
}

/// Binds an instrument to a dataset. Each item's column must exist, be
/// integer-classed, and have a dictionary range inside `[1, levels]`.
pub fn attach_instrument(ds: &ValidatedDataset, inst: &InstrumentDefinition) -> Result<InstrumentBinding, ScoringError> {
    if let Engine::Custom { scorer } = inst.engine() {
        return Err(ScoringError::UnknownCustom(scorer.clone()));
    }
    check_columns(ds, inst)?;
    Ok(InstrumentBinding { dataset: ds.clone(), instrument: inst.clone(), custom: None })
}

/// Like [`attach_instrument`], for instruments with a custom engine.
pub fn attach_instrument_with(
    ds: &ValidatedDataset,
    inst: &InstrumentDefinition,
    scorer: Arc<dyn CustomScorer>,
) -> Result<InstrumentBinding, ScoringError> {
    match inst.engine() {
        Engine::Custom { scorer: name } if name == scorer.name() => {}
        Engine::Custom { scorer: name } => return Err(ScoringError::UnknownCustom(name.clone())),
        _ => return attach_instrument(ds, inst),
    }
    check_columns(ds, inst)?;
    let best = vec![1; inst.items().len()];
    let u = scorer.score(&best);
    if u != 1.0 {
        return Err(ScoringError::CustomContract {
            name: scorer.name().into(),
            law: "anchor",
            detail: format!("all-best state scored {u}, expected 1"),
        });
    }
    Ok(InstrumentBinding { dataset: ds.clone(), instrument: inst.clone(), custom: Some(scorer) })
}

fn check_columns(ds: &ValidatedDataset, inst: &InstrumentDefinition) -> Result<(), ScoringError> {
    for it in inst.items() {
        let col = ds.column(&it.variable).ok_or_else(|| ScoringError::MissingColumn {
            item: it.item_id.clone(),
            variable: it.variable.clone(),
        })?;
        if col.class() != VarClass::Integer {
            return Err(ScoringError::ColumnClass {
                item: it.item_id.clone(),
                variable: it.variable.clone(),
                class: col.class().to_string(),
            });
        }
        let entry = ds.dictionary().get(&it.variable).expect("validated columns have entries");
        let fits = entry.min.is_some_and(|m| m >= 1.0) && entry.max.is_some_and(|m| m <= it.levels as f64);
        if !fits {
            return Err(ScoringError::RangeMismatch {
                item: it.item_id.clone(),
                variable: it.variable.clone(),
                range: entry.range_text(),
                levels: it.levels,
            });
        }
    }
    Ok(())
}

/// Per-row item, domain and total scores for a bound dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredDataset {
    pub base: ValidatedDataset,
    pub instrument: InstrumentDefinition,
    /// Item level per row, keyed by item id.
    pub item_scores: IndexMap<String, Vec<Option<f64>>>,
    /// Mean rescaled item level per domain (best = 1, worst = 0).
    pub domain_scores_unweighted: IndexMap<String, Vec<Option<f64>>>,
    /// Engine-weighted domain disutility; empty when scoring unweighted or
    /// with a custom engine.
    pub domain_scores_weighted: IndexMap<String, Vec<Option<f64>>>,
    pub total_unweighted: Vec<Option<f64>>,
    /// Clamped engine utility; all missing when scoring unweighted.
    pub total_utility: Vec<Option<f64>>,
    pub clamp_count: usize,
}

struct RowScore {
    domain_unweighted: Vec<Option<f64>>,
    domain_weighted: Vec<Option<f64>>,
    total_unweighted: Option<f64>,
    total_utility: Option<f64>,
    clamped: bool,
}

fn rescaled(level: u32, levels: u32) -> f64 {
    (levels - level) as f64 / (levels - 1) as f64
}

fn score_row(b: &InstrumentBinding, levels: &[Vec<Option<i64>>], row: usize, weighted: bool) -> Result<RowScore, ScoringError> {
    let inst = &b.instrument;
    let n_dom = inst.domains().len();
    let state: Vec<Option<u32>> = levels.iter().map(|c| c[row].map(|l| l as u32)).collect();

    let mut sums = vec![(0.0, 0usize, false); n_dom];
    for (i, (it, s)) in inst.items().iter().zip(&state).enumerate() {
        let d = inst.item_domain(i);
        match s {
            Some(l) => {
                sums[d].0 += rescaled(*l, it.levels);
                sums[d].1 += 1;
            }
            None => sums[d].2 = true,
        }
    }
    let domain_unweighted = sums.iter().map(|&(s, c, miss)| (!miss).then(|| s / c as f64)).collect();

    let full: Option<Vec<u32>> = state.iter().copied().collect();
    let Some(full) = full else {
        return Ok(RowScore {
            domain_unweighted,
            domain_weighted: vec![None; if weighted { n_dom } else { 0 }],
            total_unweighted: None,
            total_utility: None,
            clamped: false,
        });
    };
    inst.check_state(&full)?;
    let total_unweighted =
        Some(inst.items().iter().zip(&full).map(|(it, &l)| rescaled(l, it.levels)).sum::<f64>() / full.len() as f64);
    if !weighted {
        return Ok(RowScore { domain_unweighted, domain_weighted: vec![], total_unweighted, total_utility: None, clamped: false });
    }
    let (utility, clamped) = match &b.custom {
        Some(scorer) => {
            let u = scorer.score(&full);
            let [lo, hi] = inst.utility_bounds();
            if !(lo..=hi).contains(&u) {
                return Err(ScoringError::CustomContract {
                    name: scorer.name().into(),
                    law: "bounds",
                    detail: format!("row {} scored {u}, outside [{lo}, {hi}]", row + 1),
                });
            }
            if full.iter().all(|&l| l == 1) && u != 1.0 {
                return Err(ScoringError::CustomContract {
                    name: scorer.name().into(),
                    law: "anchor",
                    detail: format!("row {} is all-best but scored {u}", row + 1),
                });
            }
            (u, false)
        }
        None => inst.clamp(inst.raw_utility(&full)?),
    };
    let domain_weighted = if b.custom.is_some() {
        vec![]
    } else {
        (0..n_dom).map(|d| inst.domain_disutility(d, &full)).collect()
    };
    Ok(RowScore { domain_unweighted, domain_weighted, total_unweighted, total_utility: Some(utility), clamped })
}

/// Scores every row. Rows with any missing item get missing totals.
pub fn score_dataset(binding: &InstrumentBinding, weighted: bool) -> Result<ScoredDataset, ScoringError> {
    let inst = &binding.instrument;
    let ds = &binding.dataset;
    let levels: Vec<Vec<Option<i64>>> = inst
        .items()
        .iter()
        .map(|it| match ds.column(&it.variable) {
            Some(Column::Integer(v)) => v.clone(),
            _ => unreachable!("binding checked item columns"),
        })
        .collect();
    let rows: Vec<RowScore> =
        (0..ds.n_rows()).into_par_iter().map(|i| score_row(binding, &levels, i, weighted)).collect::<Result<_, _>>()?;

    let item_scores = inst
        .items()
        .iter()
        .zip(&levels)
        .map(|(it, col)| (it.item_id.clone(), col.iter().map(|l| l.map(|l| l as f64)).collect()))
        .collect();
    let domain_scores_unweighted = inst
        .domains()
        .iter()
        .enumerate()
        .map(|(d, dom)| (dom.domain_id.clone(), rows.iter().map(|r| r.domain_unweighted[d]).collect()))
        .collect();
    let has_weighted = weighted && binding.custom.is_none();
    let domain_scores_weighted = if has_weighted {
        inst.domains()
            .iter()
            .enumerate()
            .map(|(d, dom)| (dom.domain_id.clone(), rows.iter().map(|r| r.domain_weighted[d]).collect()))
            .collect()
    } else {
        IndexMap::new()
    };
    Ok(ScoredDataset {
        base: ds.clone(),
        instrument: inst.clone(),
        item_scores,
        domain_scores_unweighted,
        domain_scores_weighted,
        total_unweighted: rows.iter().map(|r| r.total_unweighted).collect(),
        total_utility: rows.iter().map(|r| r.total_utility).collect(),
        clamp_count: rows.iter().filter(|r| r.clamped).count(),
    })
}

pub const TOTAL_UTILITY: &str = "total_utility";
pub const TOTAL_UNWEIGHTED: &str = "total_unweighted";

impl ScoredDataset {
    /// The base dataset with score columns appended: `total_utility`,
    /// `total_unweighted`, `<domain>_unweighted` and (when weighted)
    /// `<domain>_weighted`. Describing it yields the per-domain plot data.
    pub fn to_dataset(&self) -> Result<ValidatedDataset, crate::Error> {
        let text = |v: &[Option<f64>]| v.iter().map(|x| x.map(|x| x.to_string())).collect::<Vec<_>>();
        let [lo, hi] = self.instrument.utility_bounds();
        let name = &self.instrument.name;
        let mut extra = vec![
            (
                DictionaryEntry::numeric(TOTAL_UTILITY, VarClass::Double, Some(lo), Some(hi), &format!("{name} weighted utility")),
                text(&self.total_utility),
            ),
            (
                DictionaryEntry::numeric(TOTAL_UNWEIGHTED, VarClass::Double, Some(0.0), Some(1.0), &format!("{name} unweighted total")),
                text(&self.total_unweighted),
            ),
        ];
        for (d, v) in &self.domain_scores_unweighted {
            extra.push((
                DictionaryEntry::numeric(&format!("{d}_unweighted"), VarClass::Double, Some(0.0), Some(1.0), &format!("{name} domain {d} unweighted")),
                text(v),
            ));
        }
        for (d, v) in &self.domain_scores_weighted {
            extra.push((
                DictionaryEntry::numeric(&format!("{d}_weighted"), VarClass::Double, Some(0.0), None, &format!("{name} domain {d} weighted disutility")),
                text(v),
            ));
        }
        self.base.with_columns(extra)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{ingest_table, load_dictionary, validate_dataset, DatasetMetadata};
    use crate::scoring::{score_additive, AdditiveParams, FnScorer};

    fn instrument(engine: &str, params: &str) -> InstrumentDefinition {
        InstrumentDefinition::from_json(&format!(
            r#"{{"name":"TOY","version":"1","country":"AU",
            "items":[{{"item_id":"I1","variable":"q1","levels":3}},{{"item_id":"I2","variable":"q2","levels":3}}],
            "domains":[{{"domain_id":"D1","item_ids":["I1"]}},{{"domain_id":"D2","item_ids":["I2"]}}],
            "engine":"{engine}","params":{params},"utility_bounds":[0.0,1.0]}}"#
        ))
        .unwrap()
    }

    fn additive() -> InstrumentDefinition {
        instrument("additive_decrement", r#"{"decrements":[[0,0.2,0.6],[0,0.3,0.5]]}"#)
    }

    fn dataset(rows: &str, q2_max: u32) -> ValidatedDataset {
        let dict = load_dictionary(&format!(
            "variable,class,min,max,allowed_set,description\nid,integer,,,,\nq1,integer,1,3,,\nq2,integer,1,{q2_max},,\n"
        ))
        .unwrap();
        validate_dataset(&ingest_table(&format!("id,q1,q2\n{rows}"), "NA").unwrap(), &dict, &DatasetMetadata::new("id"))
            .unwrap()
    }

    #[test]
    fn all_best_rows_score_one() {
        let b = attach_instrument(&dataset("1,1,1\n2,1,1\n3,1,1\n", 3), &additive()).unwrap();
        let s = score_dataset(&b, true).unwrap();
        assert_eq!(s.total_utility, vec![Some(1.0); 3]);
        assert_eq!(s.total_unweighted, vec![Some(1.0); 3]);
    }

    #[test]
    fn missing_item_gives_missing_total() {
        let b = attach_instrument(&dataset("1,2,NA\n2,3,3\n", 3), &additive()).unwrap();
        let s = score_dataset(&b, true).unwrap();
        assert_eq!(s.total_utility[0], None);
        assert_eq!(s.domain_scores_unweighted["D1"][0], Some(0.5));
        assert_eq!(s.domain_scores_unweighted["D2"][0], None);
        // 1 - 0.6 - 0.5 clamps to the lower bound 0
        assert_eq!(s.total_utility[1], Some(0.0));
        assert_eq!(s.clamp_count, 1);
        let described = crate::data::describe_dataset(&s.to_dataset().unwrap(), Default::default()).unwrap();
        let tu = described.strata[0].variables.iter().find(|v| v.variable == TOTAL_UTILITY).unwrap();
        assert_eq!((tu.n, tu.n_missing), (1, 1));
    }

    #[test]
    fn vectorized_matches_scalar() {
        let ds = dataset("1,1,2\n2,2,2\n3,3,1\n4,2,3\n", 3);
        let s = score_dataset(&attach_instrument(&ds, &additive()).unwrap(), true).unwrap();
        let p = AdditiveParams::new(vec![vec![0.0, 0.2, 0.6], vec![0.0, 0.3, 0.5]]).unwrap();
        let q1 = ds.numeric("q1").unwrap();
        let q2 = ds.numeric("q2").unwrap();
        for i in 0..4 {
            let u = score_additive(&[q1[i].unwrap() as u32, q2[i].unwrap() as u32], &p, 1.0).unwrap().max(0.0);
            assert_eq!(s.total_utility[i], Some(u));
        }
    }

    #[test]
    fn attach_errors() {
        let ds = dataset("1,1,1\n", 3);
        let mut inst = additive().to_json().replace("\"q2\"", "\"q9\"");
        let err = attach_instrument(&ds, &InstrumentDefinition::from_json(&inst).unwrap()).unwrap_err();
        assert_eq!(err.to_string(), "item I2: column 'q9' not found");
        inst = additive().to_json();
        let err = attach_instrument(&dataset("1,1,1\n", 4), &InstrumentDefinition::from_json(&inst).unwrap()).unwrap_err();
        assert!(err.to_string().contains("range [1, 4] of column 'q2' exceeds item levels 3"), "{err}");
    }

    #[test]
    fn custom_contract_enforced() {
        let inst = instrument("custom", r#"{"scorer":"lin"}"#);
        let ds = dataset("1,1,1\n2,3,3\n", 3);
        assert!(matches!(attach_instrument(&ds, &inst), Err(ScoringError::UnknownCustom(_))));
        let good = Arc::new(FnScorer::new("lin", |s: &[u32]| 1.0 - 0.1 * s.iter().map(|&l| (l - 1) as f64).sum::<f64>()));
        let out = score_dataset(&attach_instrument_with(&ds, &inst, good).unwrap(), true).unwrap();
        assert!((out.total_utility[1].unwrap() - 0.6).abs() < 1e-12);
        let off_anchor = Arc::new(FnScorer::new("lin", |_: &[u32]| 0.9));
        assert!(matches!(attach_instrument_with(&ds, &inst, off_anchor), Err(ScoringError::CustomContract { law: "anchor", .. })));
        let out_of_bounds = Arc::new(FnScorer::new("lin", |s: &[u32]| if s[0] == 3 { -2.0 } else { 1.0 }));
        let b = attach_instrument_with(&ds, &inst, out_of_bounds).unwrap();
        assert!(matches!(score_dataset(&b, true), Err(ScoringError::CustomContract { law: "bounds", .. })));
    }

    #[test]
    fn unweighted_mode_skips_engine() {
        let s = score_dataset(&attach_instrument(&dataset("1,2,3\n", 3), &additive()).unwrap(), false).unwrap();
        assert_eq!(s.total_utility, vec![None]);
        assert_eq!(s.total_unweighted, vec![Some(0.25)]);
        assert!(s.domain_scores_weighted.is_empty());
    }
}
