//! Synthetic dataset generation.
//!
//! Ordered columns (integer, double, date) are resampled from their observed
//! values and then re-ordered so that their ranks follow the ranks of a
//! shared set of bootstrapped template rows. Every column is coupled to the
//! same template, which approximately preserves pairwise rank correlation
//! while only ever emitting values that were observed in the source.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Column, DataError, RawTable, ValidatedDataset, VarClass};

/// Generates `n_out` synthetic rows that validate under the source
/// dictionary. Person identifiers are freshly minted and never coincide with
/// source identifiers. Deterministic for a fixed `seed`.
pub fn synthesize_dataset(ds: &ValidatedDataset, n_out: usize, seed: u64) -> Result<ValidatedDataset, crate::Error> {
    if n_out < 1 {
        return Err(DataError::Synthesis("n_out must be at least 1".into()).into());
    }
    let n = ds.n_rows();
    if n < 2 {
        return Err(DataError::Synthesis(format!("source needs at least 2 rows, has {n}")).into());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let template: Vec<usize> = (0..n_out).map(|_| rng.random_range(0..n)).collect();
    let uid_var = &ds.metadata().uid_var;

    let mut out = Vec::new();
    for (name, col) in ds.columns() {
        let cells = if name == uid_var {
            fresh_uids(ds, n_out)?
        } else {
            match col {
                Column::Integer(_) | Column::Double(_) | Column::Date(_) => rank_coupled(col, &template, &mut rng),
                Column::Categorical(_) | Column::Text(_) => {
                    (0..n_out).map(|_| col.cell_text(rng.random_range(0..n))).collect()
                }
            }
        };
        out.push((name.to_string(), cells));
    }
    let raw = RawTable::from_columns(out)?;
    Ok(super::validate_dataset(&raw, ds.dictionary(), ds.metadata())?)
}

fn rank_coupled(col: &Column, template: &[usize], rng: &mut ChaCha8Rng) -> Vec<Option<String>> {
    let values = col.as_f64().expect("ordered column");
    let observed: Vec<usize> = (0..values.len()).filter(|&i| values[i].is_some()).collect();
    let mut cells = vec![None; template.len()];
    if observed.is_empty() {
        return cells;
    }
    // rows whose template cell is missing stay missing
    let mut targets: Vec<(f64, u64, usize)> = template
        .iter()
        .enumerate()
        .filter_map(|(out_row, &src)| values[src].map(|v| (v, rng.random::<u64>(), out_row)))
        .collect();
    targets.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut draws: Vec<usize> = (0..targets.len()).map(|_| observed[rng.random_range(0..observed.len())]).collect();
    draws.sort_by(|&a, &b| values[a].unwrap().total_cmp(&values[b].unwrap()));
    for ((_, _, out_row), src) in targets.into_iter().zip(draws) {
        cells[out_row] = col.cell_text(src);
    }
    cells
}

fn fresh_uids(ds: &ValidatedDataset, n_out: usize) -> Result<Vec<Option<String>>, DataError> {
    let uid_var = &ds.metadata().uid_var;
    let entry = ds.dictionary().get(uid_var).expect("uid has a dictionary entry");
    let existing: HashSet<String> = ds.uids().into_iter().flatten().collect();
    match entry.class {
        VarClass::Text => {
            let mut prefix = "SYN".to_string();
            loop {
                let ids: Vec<String> = (1..=n_out).map(|i| format!("{prefix}{i:06}")).collect();
                if ids.iter().all(|id| !existing.contains(id)) {
                    return Ok(ids.into_iter().map(Some).collect());
                }
                prefix.push('X');
            }
        }
        VarClass::Integer => {
            let max_seen = ds.numeric(uid_var).unwrap_or_default().into_iter().flatten().fold(0.0, f64::max) as i64;
            let start = max_seen.max(entry.min.unwrap_or(0.0) as i64 - 1) + 1;
            let last = start + n_out as i64 - 1;
            if entry.max.is_some_and(|m| last as f64 > m) {
                return Err(DataError::Synthesis(format!(
                    "{uid_var}: cannot mint {n_out} new identifiers within {}",
                    entry.range_text()
                )));
            }
            Ok((start..=last).map(|i| Some(i.to_string())).collect())
        }
        other => Err(DataError::Synthesis(format!("{uid_var}: identifiers of class {other} are not supported"))),
    }
}

/// Fisher-Yates shuffle helper for callers needing seeded permutations.
pub(crate) fn seeded_permutation(n: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng);
    idx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{ingest_table, load_dictionary, validate_dataset, DatasetMetadata};

    fn source() -> ValidatedDataset {
        let dict = load_dictionary(
            "variable,class,min,max,allowed_set,description\n\
             uid,integer,1,100000,,\nage,integer,15,24,,\nscore,double,0,10,,\nsex,categorical,,,F|M,\n",
        )
        .unwrap();
        let mut src = String::from("uid,age,score,sex\n");
        for i in 0..40 {
            let age = 15 + i % 10;
            let score = if i % 7 == 0 { "NA".to_string() } else { format!("{:.1}", (age - 15) as f64 + 0.5) };
            src.push_str(&format!("{},{age},{score},{}\n", i + 1, if i % 3 == 0 { "F" } else { "M" }));
        }
        validate_dataset(&ingest_table(&src, "NA").unwrap(), &dict, &DatasetMetadata::new("uid")).unwrap()
    }

    #[test]
    fn deterministic_and_valid() {
        let ds = source();
        let a = synthesize_dataset(&ds, 50, 7).unwrap();
        let b = synthesize_dataset(&ds, 50, 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.n_rows(), 50);
        assert_ne!(synthesize_dataset(&ds, 50, 8).unwrap(), a);
        validate_dataset(&a.to_raw(), ds.dictionary(), ds.metadata()).unwrap();
    }

    #[test]
    fn uids_are_fresh() {
        let ds = source();
        let syn = synthesize_dataset(&ds, 30, 1).unwrap();
        let src: HashSet<_> = ds.uids().into_iter().collect();
        assert!(syn.uids().iter().all(|u| !src.contains(u)));
    }

    #[test]
    fn rank_coupling_preserves_association() {
        // score increases with age in the source; independent resampling
        // would give a correlation near zero
        let syn = synthesize_dataset(&source(), 200, 3).unwrap();
        let age = syn.numeric("age").unwrap();
        let score = syn.numeric("score").unwrap();
        let pairs: Vec<(f64, f64)> = age.iter().zip(&score).filter_map(|(a, s)| Some(((*a)?, (*s)?))).collect();
        let n = pairs.len() as f64;
        let (ma, ms) = (pairs.iter().map(|p| p.0).sum::<f64>() / n, pairs.iter().map(|p| p.1).sum::<f64>() / n);
        let cov: f64 = pairs.iter().map(|p| (p.0 - ma) * (p.1 - ms)).sum();
        let va: f64 = pairs.iter().map(|p| (p.0 - ma).powi(2)).sum();
        let vs: f64 = pairs.iter().map(|p| (p.1 - ms).powi(2)).sum();
        assert!(cov / (va * vs).sqrt() > 0.9);
    }

    #[test]
    fn rejects_bad_sizes() {
        assert!(synthesize_dataset(&source(), 0, 1).is_err());
        let ds = source();
        let one = validate_dataset(
            &ingest_table("uid,age,score,sex\n1,15,1,F\n", "NA").unwrap(),
            ds.dictionary(),
            ds.metadata(),
        )
        .unwrap();
        assert!(synthesize_dataset(&one, 5, 1).is_err());
    }

    #[test]
    fn permutation_is_seeded() {
        let p = seeded_permutation(10, 4);
        assert_eq!(p, seeded_permutation(10, 4));
        let mut s = p.clone();
        s.sort();
        assert_eq!(s, (0..10).collect::<Vec<_>>());
    }
}
