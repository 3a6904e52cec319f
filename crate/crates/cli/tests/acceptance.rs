//! Acceptance suite. Runs each criterion, prints one PASS/FAIL line per
//! criterion with its runtime and budget, and exits nonzero on any failure.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use chemkit_core::data::Column;
use chemkit_core::mapping::{
    assign_cluster_folds, assign_folds, evaluate_candidates, log_likelihood, score_vector, CatalogueMeta, Design, GlmFamily,
};
use chemkit_core::modules::{Dispatcher, ModuleError, CLI_SUBCOMMANDS};
use chemkit_core::predict::{default_variable_map, qaly};
use chemkit_core::registry::{ArtifactKind, PublishMeta, RegistryError};
use chemkit_core::report::StepStatus;
use chemkit_core::{
    attach_instrument, build_catalogue, cross_validate, define_module, fit_glm_irls, fit_lmm_random_intercept, fit_ols,
    fit_transformed_ols, ingest_table, load_dictionary, predict_utility, score_dataset, specify_candidates,
    synthesize_dataset, validate_dataset, DatasetMetadata, FittedModel, InstrumentDefinition, LocalRegistry,
    ModelCatalogue, PredictionRequest, Registry, RunRecord, ValidatedDataset, Verb,
};

type Check = fn();

fn main() {
    let criteria: [(u32, &str, u64, Check); 10] = [
        (1, "verb syntax", 5, verbs),
        (2, "dictionary validation", 5, validation),
        (3, "instrument scoring", 10, scoring),
        (4, "model fitting", 60, fitting),
        (5, "cross-validation folds", 30, folds),
        (6, "model catalogue", 10, catalogue),
        (7, "prediction and QALYs", 5, prediction),
        (8, "replication manifest", 120, replication),
        (9, "artifact registry", 10, registry),
        (10, "synthetic data", 10, synthesis),
    ];
    let only: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (id, name, budget, check) in criteria {
        if !only.is_empty() && !only.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(check));
        let elapsed = start.elapsed();
        let verdict = match outcome {
            Ok(()) if elapsed <= Duration::from_secs(budget) => Ok(()),
            Ok(()) => Err(format!("exceeded the {budget} s budget")),
            Err(payload) => Err(payload
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| payload.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into())),
        };
        match verdict {
            Ok(()) => println!("PASS  {id:>2}. {name:<24} {:>8.2} s (budget {budget} s)", elapsed.as_secs_f64()),
            Err(why) => {
                failed += 1;
                println!("FAIL  {id:>2}. {name:<24} {:>8.2} s (budget {budget} s): {why}", elapsed.as_secs_f64());
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}

// ---------------------------------------------------------------- helpers

fn toy(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../toy").join(name)
}

fn read(path: &Path) -> String {
    fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn chemkit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chemkit")).args(args).output().expect("binary runs")
}

fn toy_meta() -> DatasetMetadata {
    DatasetMetadata::new("uid").with_round("round").with_group("group")
}

fn toy_dataset() -> ValidatedDataset {
    let raw = ingest_table(&read(&toy("records.csv")), "NA").unwrap();
    let dict = load_dictionary(&read(&toy("dictionary.csv"))).unwrap();
    validate_dataset(&raw, &dict, &toy_meta()).unwrap()
}

fn scored_toy() -> ValidatedDataset {
    let inst = InstrumentDefinition::from_json(&read(&toy("instrument.json"))).unwrap();
    score_dataset(&attach_instrument(&toy_dataset(), &inst).unwrap(), true).unwrap().to_dataset().unwrap()
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn normal(r: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = r.random::<f64>().max(1e-300);
    let u2: f64 = r.random();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Dense Gaussian elimination with partial pivoting.
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for c in 0..n {
        let piv = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
        a.swap(c, piv);
        b.swap(c, piv);
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            for k in c..n {
                a[r][k] -= f * a[c][k];
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn rows_of(d: &Design) -> Vec<Vec<f64>> {
    (0..d.n()).map(|i| d.row(i)).collect()
}

fn ols_beta(x: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let p = x[0].len();
    let mut xtx = vec![vec![0.0; p]; p];
    let mut xty = vec![0.0; p];
    for (row, &yi) in x.iter().zip(y) {
        for a in 0..p {
            xty[a] += row[a] * yi;
            for b in 0..p {
                xtx[a][b] += row[a] * row[b];
            }
        }
    }
    solve(xtx, xty)
}

// ---------------------------------------------------------------- 1

fn verbs() {
    assert_eq!(Verb::ALL.len(), 15);
    let names: BTreeSet<&str> = Verb::ALL.iter().map(|v| v.as_str()).collect();
    assert_eq!(names.len(), 15, "verb names are distinct");
    for v in Verb::ALL {
        assert_eq!(v.as_str().parse::<Verb>().unwrap(), v);
    }

    let help = String::from_utf8(chemkit(&["--help"]).stdout).unwrap();
    let listed: BTreeSet<String> = help
        .lines()
        .skip_while(|l| !l.starts_with("Commands:"))
        .skip(1)
        .take_while(|l| !l.trim().is_empty())
        .filter_map(|l| l.split_whitespace().next().map(str::to_string))
        .filter(|n| n != "help")
        .collect();
    let declared: BTreeSet<String> = CLI_SUBCOMMANDS.iter().map(|(n, _)| n.to_string()).collect();
    assert_eq!(listed, declared, "binary subcommands match the declared table");
    for (name, verb) in CLI_SUBCOMMANDS {
        let line = help.lines().find(|l| l.split_whitespace().next() == Some(name)).unwrap();
        assert!(line.contains(&format!("[verb: {verb}]")), "{line}");
    }

    let mut r = rng(1);
    for i in 0..100 {
        let mut supported: Vec<Verb> = Verb::ALL.iter().copied().filter(|_| r.random_bool(0.4)).collect();
        if supported.is_empty() {
            supported.push(Verb::ALL[r.random_range(0..15)]);
        }
        if supported.len() == 15 {
            supported.pop();
        }
        let names: Vec<&str> = supported.iter().map(|v| v.as_str()).collect();
        let name = format!("m{i}");
        let d = define_module(&name, &[], &names, "0.1.0").unwrap();
        let mut disp = Dispatcher::new();
        disp.add_module(d.clone()).unwrap();
        let mut inst = disp.instantiate(&name, []).unwrap();
        let before = inst.snapshot();
        let missing: Vec<Verb> = Verb::ALL.iter().copied().filter(|v| !supported.contains(v)).collect();
        let verb = missing[r.random_range(0..missing.len())];
        match disp.invoke(&mut inst, verb.as_str(), &Value::Null) {
            Err(e @ ModuleError::UnsupportedVerb { .. }) => {
                let msg = e.to_string();
                assert!(msg.contains(&d.supported_list()), "{msg}");
                for s in &names {
                    assert!(msg.contains(s), "{msg} lacks {s}");
                }
            }
            other => panic!("descriptor {i}: {verb} gave {other:?}"),
        }
        assert_eq!(inst.snapshot(), before);
    }
}

// ---------------------------------------------------------------- 2

fn validation() {
    let ds = toy_dataset();
    assert!(ds.n_rows() >= 200, "{} rows", ds.n_rows());
    assert!(ds.column_names().count() >= 8);

    let text = read(&toy("records.csv"));
    let lines: Vec<&str> = text.lines().collect();
    let header: Vec<&str> = lines[0].split(',').collect();
    let dict = load_dictionary(&read(&toy("dictionary.csv"))).unwrap();
    // (variable, data row, bad value)
    let plants: [(&str, usize, &str); 12] = [
        ("age", 1, "26"),
        ("age", 7, "11"),
        ("age", 12, "19.5"),
        ("k6", 30, "5"),
        ("phq9", 44, "28"),
        ("sofas", 58, "101"),
        ("eq1", 71, "6"),
        ("eq3", 99, "0"),
        ("round", 120, "3"),
        ("sex", 150, "Q"),
        ("group", 201, "home"),
        ("date", 240, "2021-13-01"),
    ];
    let dir = tempfile::tempdir().unwrap();
    for (variable, row, value) in plants {
        let col = header.iter().position(|h| *h == variable).unwrap();
        let mut corrupt: Vec<String> = lines.iter().map(|l| l.to_string()).collect();
        let mut cells: Vec<&str> = lines[row].split(',').collect();
        cells[col] = value;
        corrupt[row] = cells.join(",");
        let body = corrupt.join("\n") + "\n";

        let entry = dict.get(variable).unwrap();
        let bound = match entry.class {
            chemkit_core::data::VarClass::Categorical => entry.allowed_text(),
            chemkit_core::data::VarClass::Date => "YYYY-MM-DD".to_string(),
            _ => entry.range_text(),
        };
        let raw = ingest_table(&body, "NA").unwrap();
        let err = validate_dataset(&raw, &dict, &toy_meta()).expect_err(variable);
        assert_eq!(err.issues.len(), 1, "{err}");
        let msg = &err.issues[0];
        for needle in [variable, &format!("row {row}"), &bound] {
            assert!(msg.contains(needle), "'{msg}' should name {needle}");
        }

        let path = dir.path().join(format!("{variable}_{row}.csv"));
        fs::write(&path, &body).unwrap();
        let dict_path = toy("dictionary.csv");
        let o = chemkit(&[
            "validate",
            "--data",
            path.to_str().unwrap(),
            "--dict",
            dict_path.to_str().unwrap(),
            "--round",
            "round",
            "--group",
            "group",
        ]);
        assert_eq!(o.status.code(), Some(2), "{variable}: {}", String::from_utf8_lossy(&o.stderr));
        assert!(String::from_utf8_lossy(&o.stderr).contains(msg.as_str()));
    }
}

// ---------------------------------------------------------------- 3

/// A random instrument file: 2 to 6 items, 2 to 6 levels, domains from a
/// random partition, and tables that worsen monotonically with level.
fn random_instrument(r: &mut ChaCha8Rng, multiplicative: bool) -> String {
    let n_items = r.random_range(2..=6);
    let items: Vec<Value> = (0..n_items)
        .map(|i| json!({"item_id": format!("I{i}"), "variable": format!("q{i}"), "levels": r.random_range(2..=6u32)}))
        .collect();
    let n_domains = r.random_range(1..=n_items.min(3));
    let mut members: Vec<Vec<String>> = vec![vec![]; n_domains];
    for i in 0..n_items {
        let d = if i < n_domains { i } else { r.random_range(0..n_domains) };
        members[d].push(format!("I{i}"));
    }
    let domains: Vec<Value> =
        members.iter().enumerate().map(|(d, m)| json!({"domain_id": format!("D{d}"), "item_ids": m})).collect();
    let mut table = |cap: f64| -> Vec<Vec<f64>> {
        items
            .iter()
            .map(|it| {
                let levels = it["levels"].as_u64().unwrap() as usize;
                let mut row = vec![0.0];
                for _ in 1..levels {
                    let next = (row.last().unwrap() + r.random::<f64>() * cap).min(1.0);
                    row.push(next);
                }
                row
            })
            .collect()
    };
    let (engine, params, bounds) = if multiplicative {
        let w = table(0.3);
        let k: Vec<f64> = (0..n_domains).map(|_| r.random_range(0.2..1.0)).collect();
        ("multiplicative_domain", json!({"item_weights": w, "domain_weights": k, "scale": r.random_range(0.5..1.2)}), [-0.5, 1.0])
    } else {
        ("additive_decrement", json!({"decrements": table(0.1)}), [-1.0, 1.0])
    };
    json!({
        "name": "random", "version": "1.0.0", "country": "XX",
        "items": items, "domains": domains, "engine": engine, "params": params, "utility_bounds": bounds
    })
    .to_string()
}

fn scoring() {
    let mut r = rng(3);
    let mut additive = vec![];
    for i in 0..50 {
        for multiplicative in [false, true] {
            let inst = InstrumentDefinition::from_json(&random_instrument(&mut r, multiplicative)).unwrap();
            let best = vec![1; inst.items().len()];
            assert_eq!(inst.raw_utility(&best).unwrap(), 1.0, "file {i} multiplicative={multiplicative}");
            if !multiplicative {
                additive.push(inst);
            }
        }
    }
    for _ in 0..1000 {
        let inst = &additive[r.random_range(0..additive.len())];
        let levels: Vec<u32> = inst.items().iter().map(|it| it.levels).collect();
        let mut state: Vec<u32> = levels.iter().map(|&l| r.random_range(1..=l)).collect();
        let worsenable: Vec<usize> = (0..state.len()).filter(|&i| state[i] < levels[i]).collect();
        if worsenable.is_empty() {
            state[0] = 1;
            continue;
        }
        let before = inst.raw_utility(&state).unwrap();
        state[worsenable[r.random_range(0..worsenable.len())]] += 1;
        assert!(inst.raw_utility(&state).unwrap() <= before);
    }

    let ds = toy_dataset();
    for file in ["instrument.json", "instrument_multiplicative.json"] {
        let inst = InstrumentDefinition::from_json(&read(&toy(file))).unwrap();
        let scored = score_dataset(&attach_instrument(&ds, &inst).unwrap(), true).unwrap();
        let cols: Vec<Vec<Option<f64>>> = inst.items().iter().map(|it| ds.numeric(&it.variable).unwrap()).collect();
        for row in 0..ds.n_rows() {
            let state: Option<Vec<u32>> = cols.iter().map(|c| c[row].map(|v| v as u32)).collect();
            let expected = state.map(|s| inst.clamp(inst.raw_utility(&s).unwrap()).0);
            assert_eq!(scored.total_utility[row], expected, "{file} row {row}");
        }
    }
}

// ---------------------------------------------------------------- 4

/// Maximum likelihood by full Newton on the observed Hessian, with step
/// halving, started from least squares on ln y.
fn newton_log_link(family: GlmFamily, x: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let ll = |b: &[f64]| -> f64 {
        x.iter()
            .zip(y)
            .map(|(row, &yi)| {
                let eta = dot(row, b);
                match family {
                    GlmFamily::GammaLog => -yi * (-eta).exp() - eta,
                    GlmFamily::GaussianLog => -0.5 * (yi - eta.exp()).powi(2),
                }
            })
            .sum()
    };
    let p = x[0].len();
    let mut beta = ols_beta(x, &y.iter().map(|v| v.ln()).collect::<Vec<_>>());
    for _ in 0..500 {
        let mut g = vec![0.0; p];
        let mut h = vec![vec![0.0; p]; p];
        for (row, &yi) in x.iter().zip(y) {
            let mu = dot(row, &beta).exp();
            let (d1, d2) = match family {
                GlmFamily::GammaLog => (yi / mu - 1.0, -yi / mu),
                GlmFamily::GaussianLog => ((yi - mu) * mu, (yi - 2.0 * mu) * mu),
            };
            for a in 0..p {
                g[a] += d1 * row[a];
                for b in 0..p {
                    h[a][b] -= d2 * row[a] * row[b];
                }
            }
        }
        let step = solve(h, g);
        let base = ll(&beta);
        let mut t = 1.0;
        let mut next: Vec<f64> = beta.iter().zip(&step).map(|(b, s)| b + s).collect();
        while ll(&next) < base && t > 1e-10 {
            t *= 0.5;
            next = beta.iter().zip(&step).map(|(b, s)| b + t * s).collect();
        }
        let change = max_abs_diff(&next, &beta);
        beta = next;
        if change < 1e-14 {
            break;
        }
    }
    beta
}

fn glm_instance(seed: u64, family: GlmFamily) -> (Design, Vec<f64>) {
    let mut r = rng(seed);
    let n = r.random_range(10..=40);
    let x1: Vec<f64> = (0..n).map(|_| r.random::<f64>()).collect();
    let x2: Vec<f64> = (0..n).map(|_| r.random_range(-1.0..1.0)).collect();
    let y: Vec<f64> = x1
        .iter()
        .zip(&x2)
        .map(|(a, b)| {
            let mu = (-0.4 + 0.6 * a - 0.3 * b).exp();
            match family {
                GlmFamily::GammaLog => mu * (0.3 * normal(&mut r)).exp(),
                GlmFamily::GaussianLog => (mu + 0.05 * normal(&mut r)).max(0.01),
            }
        })
        .collect();
    (Design::from_columns(&[("x1", &x1), ("x2", &x2)]).unwrap(), y)
}

/// Log-likelihood of a random-intercept model by dense Cholesky of the full
/// covariance, with beta profiled out by generalized least squares.
fn dense_lmm(x: &[Vec<f64>], y: &[f64], clusters: &[usize], sb2: f64, se2: f64, beta: Option<&[f64]>) -> f64 {
    let n = y.len();
    let mut v = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            v[i][j] = if clusters[i] == clusters[j] { sb2 } else { 0.0 } + if i == j { se2 } else { 0.0 };
        }
    }
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            l[i][j] = if i == j { (v[i][i] - s).sqrt() } else { (v[i][j] - s) / l[j][j] };
        }
    }
    let forward = |b: &[f64]| {
        let mut z = vec![0.0; n];
        for i in 0..n {
            z[i] = (b[i] - (0..i).map(|k| l[i][k] * z[k]).sum::<f64>()) / l[i][i];
        }
        z
    };
    let p = x[0].len();
    let wy = forward(y);
    let wx: Vec<Vec<f64>> = (0..p).map(|c| forward(&x.iter().map(|r| r[c]).collect::<Vec<_>>())).collect();
    let beta = match beta {
        Some(b) => b.to_vec(),
        None => {
            let a: Vec<Vec<f64>> = (0..p).map(|i| (0..p).map(|j| dot(&wx[i], &wx[j])).collect()).collect();
            let b: Vec<f64> = (0..p).map(|i| dot(&wx[i], &wy)).collect();
            solve(a, b)
        }
    };
    let resid: Vec<f64> = (0..n).map(|i| wy[i] - (0..p).map(|c| wx[c][i] * beta[c]).sum::<f64>()).collect();
    let logdet: f64 = (0..n).map(|i| 2.0 * l[i][i].ln()).sum();
    -0.5 * (n as f64 * (2.0 * std::f64::consts::PI).ln() + logdet + dot(&resid, &resid))
}

fn lmm_instance(seed: u64, n_clusters: usize, per: usize, sb: f64) -> (Design, Vec<f64>, Vec<String>, Vec<usize>) {
    let mut r = rng(seed);
    let mut x = vec![];
    let mut y = vec![];
    let mut ids = vec![];
    for c in 0..n_clusters {
        let b = sb * normal(&mut r);
        let noise: Vec<f64> = (0..per).map(|_| 0.3 * normal(&mut r)).collect();
        // Without a planted cluster effect the noise is centred per cluster,
        // so cluster means carry no between-cluster variance at all.
        let centre = if sb == 0.0 { noise.iter().sum::<f64>() / per as f64 } else { 0.0 };
        for e in noise {
            let xi: f64 = r.random_range(0.0..2.0);
            x.push(xi);
            y.push(1.0 + 0.5 * xi + b + e - centre);
            ids.push(c);
        }
    }
    let design = Design::from_columns(&[("x", &x)]).unwrap();
    (design, y, ids.iter().map(|c| format!("c{c}")).collect(), ids)
}

fn assert_beats_grid(design: &Design, y: &[f64], ids: &[usize], m: &FittedModel) {
    let x = rows_of(design);
    let sb2 = m.random_intercept_var.unwrap();
    let se2 = m.sigma.unwrap().powi(2);
    let fitted = dense_lmm(&x, y, ids, sb2, se2, Some(&m.beta()));
    let sb_hi = (2.0 * sb2).max(0.5 * se2);
    let mut best = f64::NEG_INFINITY;
    for i in 0..10 {
        for j in 0..10 {
            let gb = sb_hi * i as f64 / 9.0;
            let ge = se2 * (0.5 + j as f64 / 9.0);
            best = best.max(dense_lmm(&x, y, ids, gb, ge, None));
        }
    }
    assert!(fitted >= best - 1e-9 * best.abs().max(1.0), "fit {fitted} below grid {best}");
}

fn fitting() {
    let mut r = rng(4);
    for i in 0..100 {
        let n = r.random_range(10..=200);
        let p = r.random_range(1..=5);
        let cols: Vec<(String, Vec<f64>)> =
            (0..p).map(|c| (format!("x{c}"), (0..n).map(|_| r.random_range(-10.0..10.0) * 10f64.powi(c as i32 - 2)).collect())).collect();
        let y: Vec<f64> = (0..n).map(|_| r.random_range(-5.0..5.0) * 100.0).collect();
        let named: Vec<(&str, &[f64])> = cols.iter().map(|(n, v)| (n.as_str(), v.as_slice())).collect();
        let design = Design::from_columns(&named).unwrap();
        let m = fit_ols(&y, &design).unwrap();
        let x = rows_of(&design);
        let beta = m.beta();
        let resid: Vec<f64> = x.iter().zip(&y).map(|(row, yi)| yi - dot(row, &beta)).collect();
        let norm = |v: &[f64]| (0..p + 1).map(|c| x.iter().zip(v).map(|(row, e)| row[c] * e).sum::<f64>().abs()).fold(0.0, f64::max);
        let rel = norm(&resid) / norm(&y);
        assert!(rel < 1e-8, "instance {i}: relative orthogonality {rel}");
    }

    for seed in 0..10 {
        for family in [GlmFamily::GammaLog, GlmFamily::GaussianLog] {
            let (design, y) = glm_instance(100 + seed, family);
            let m = fit_glm_irls(&y, &design, family, 200, 1e-12).unwrap();
            assert!(m.converged);
            let oracle = newton_log_link(family, &rows_of(&design), &y);
            let gap = max_abs_diff(&m.beta(), &oracle);
            assert!(gap < 1e-6, "{family:?} instance {seed}: {gap}");

            let h = 1e-6;
            let fd = |b: &[f64]| -> Vec<f64> {
                (0..b.len())
                    .map(|j| {
                        let mut up = b.to_vec();
                        let mut dn = b.to_vec();
                        up[j] += h;
                        dn[j] -= h;
                        (log_likelihood(family, &y, &design, &up) - log_likelihood(family, &y, &design, &dn)) / (2.0 * h)
                    })
                    .collect()
            };
            let at_fit = fd(&m.beta());
            assert!(at_fit.iter().all(|g| g.abs() < 1e-5), "{family:?} {seed}: gradient at fit {at_fit:?}");
            let probe: Vec<f64> = m.beta().iter().map(|b| b + 0.1).collect();
            let analytic = score_vector(family, &y, &design, &probe);
            let numeric = fd(&probe);
            for (a, b) in analytic.iter().zip(&numeric) {
                assert!((a - b).abs() < 1e-5 * a.abs().max(1.0), "{family:?} {seed}: {a} vs {b}");
            }
        }
    }

    let (design, y, clusters, ids) = lmm_instance(7, 10, 4, 0.0);
    let m = fit_lmm_random_intercept(&y, &design, &clusters, 500, 1e-12).unwrap();
    let ols = fit_ols(&y, &design).unwrap();
    let gap = max_abs_diff(&m.beta(), &ols.beta());
    assert!(m.random_intercept_var.unwrap() < 1e-8, "cluster variance {:?}", m.random_intercept_var);
    assert!(gap < 1e-4, "zero-variance LMM vs OLS: {gap}");
    assert_beats_grid(&design, &y, &ids, &m);

    let (design, y, clusters, ids) = lmm_instance(8, 8, 5, 0.8);
    let m = fit_lmm_random_intercept(&y, &design, &clusters, 500, 1e-12).unwrap();
    assert!(m.random_intercept_var.unwrap() > 0.0);
    assert_beats_grid(&design, &y, &ids, &m);
}

// ---------------------------------------------------------------- 5

fn folds() {
    let mut r = rng(5);
    for t in 0..200 {
        let n = r.random_range(2..=400);
        let k = r.random_range(2..=n.min(20));
        let seed: u64 = r.random();
        let f = assign_folds(n, k, seed);
        assert_eq!(f, assign_folds(n, k, seed));
        assert_eq!(f.len(), n, "every row assigned once");
        let mut sizes = vec![0usize; k];
        for &i in &f {
            assert!(i < k);
            sizes[i] += 1;
        }
        let (lo, hi) = (*sizes.iter().min().unwrap(), *sizes.iter().max().unwrap());
        assert!(lo >= 1 && hi - lo <= 1, "triple {t}: sizes {sizes:?}");

        let n_clusters = r.random_range(k..=n.max(k));
        let clusters: Vec<String> = (0..n).map(|i| format!("c{}", if i < n_clusters { i } else { r.random_range(0..n_clusters) })).collect();
        let cf = assign_cluster_folds(&clusters, k, seed).unwrap();
        assert_eq!(cf, assign_cluster_folds(&clusters, k, seed).unwrap());
        let mut fold_of: BTreeMap<&str, usize> = BTreeMap::new();
        for (c, &f) in clusters.iter().zip(&cf) {
            assert_eq!(*fold_of.entry(c).or_insert(f), f, "cluster {c} split across folds");
        }
        let mut per_fold = vec![0usize; k];
        for f in fold_of.values() {
            per_fold[*f] += 1;
        }
        let (lo, hi) = (*per_fold.iter().min().unwrap(), *per_fold.iter().max().unwrap());
        assert!(lo >= 1 && hi - lo <= 1, "triple {t}: clusters per fold {per_fold:?}");
    }

    let ds = scored_toy();
    let spec = specify_candidates(&ds, "total_utility", &["k6", "phq9"], &["age"], &[], 5, 11).unwrap();
    assert_eq!(cross_validate(&ds, &spec).unwrap(), cross_validate(&ds, &spec).unwrap());
}

// ---------------------------------------------------------------- 6

const SENTINEL_UID: &str = "PLANTED-SENTINEL-0042";
const SENTINEL_X: f64 = 7.77123456789;
const SENTINEL_U: f64 = 0.31415926535;

/// `copies` replicates of a 50-row study (25 people, two rounds), with
/// planted sentinel values in the first copy.
fn study(copies: usize) -> ValidatedDataset {
    let mut r = rng(6);
    let base: Vec<(usize, i64, f64, i64, &str, f64)> = (0..50)
        .map(|i| {
            let x = (r.random_range(0.0..10.0) * 1e9f64).round() / 1e9;
            let z = r.random_range(0..=20);
            let u = (0.9 - 0.04 * x - 0.005 * z as f64 + 0.05 * normal(&mut r)).clamp(0.05, 0.95);
            (i / 2, (i % 2 + 1) as i64, x, z, ["F", "M"][r.random_range(0..2)], (u * 1e9).round() / 1e9)
        })
        .collect();
    let mut csv = String::from("uid,round,x,z,sex,u\n");
    for c in 0..copies {
        for (i, &(person, round, x, z, sex, u)) in base.iter().enumerate() {
            let (uid, x, u) = match (c, i) {
                (0, 0) | (0, 1) => (SENTINEL_UID.to_string(), if i == 0 { SENTINEL_X } else { x }, if i == 1 { SENTINEL_U } else { u }),
                _ => (format!("p{c}-{person}"), x, u),
            };
            csv.push_str(&format!("{uid},{round},{x},{z},{sex},{u}\n"));
        }
    }
    let dict = "variable,class,min,max,allowed_set,description\n\
                uid,text,,,,person\nround,integer,1,2,,round\nx,double,0,10,,scale score\n\
                z,integer,0,20,,count\nsex,categorical,,,F|M,sex\nu,double,0,1,,utility\n";
    let raw = ingest_table(&csv, "NA").unwrap();
    validate_dataset(&raw, &load_dictionary(dict).unwrap(), &DatasetMetadata::new("uid").with_round("round")).unwrap()
}

fn study_catalogue(ds: &ValidatedDataset) -> ModelCatalogue {
    let spec = specify_candidates(ds, "u", &["x", "z"], &["sex"], &[], 5, 9).unwrap();
    let entries = evaluate_candidates(ds, &spec).unwrap();
    build_catalogue(entries, CatalogueMeta::new(ds, "study").created_at("2020-01-01T00:00:00Z")).unwrap()
}

/// Replaces float literals, the `n_train` value, iteration counts and the
/// fingerprint with fixed placeholders.
fn mask(json: &str, fingerprint: &str) -> String {
    let json = json.replace(fingerprint, "FINGERPRINT");
    let chars: Vec<char> = json.chars().collect();
    let mut out = String::with_capacity(json.len());
    let mut i = 0;
    while i < chars.len() {
        let starts = chars[i].is_ascii_digit() || (chars[i] == '-' && chars.get(i + 1).is_some_and(char::is_ascii_digit));
        let after_word = i > 0 && (chars[i - 1].is_ascii_alphanumeric() || chars[i - 1] == '_');
        if starts && !after_word {
            let mut j = i + 1;
            while j < chars.len() && (chars[j].is_ascii_digit() || ".eE+-".contains(chars[j])) {
                j += 1;
            }
            let token: String = chars[i..j].iter().collect();
            if token.contains('.') || token.contains('e') || out.ends_with("\"n_train\": ") || out.ends_with("\"iterations\": ") {
                out.push('#');
            } else {
                out.push_str(&token);
            }
            i = j;
        } else {
            out.push(chars[i]);
            i += 1;
        }
    }
    out
}

fn catalogue() {
    let ds = study(1);
    let cat = study_catalogue(&ds);
    assert_eq!(cat.models.len(), 12);
    let json = cat.to_json();

    let back = ModelCatalogue::from_json(&json).unwrap();
    for (a, b) in cat.models.iter().zip(&back.models) {
        let run = |m: &FittedModel| {
            let req = PredictionRequest { model: m, newdata: &ds, variable_map: default_variable_map(m), utility_bounds: [0.0, 1.0] };
            predict_utility(&req).unwrap().values
        };
        for (p, q) in run(&a.model).iter().zip(run(&b.model)) {
            assert!((p.unwrap() - q.unwrap()).abs() <= 1e-12);
        }
    }

    let digits = json.replace('.', "");
    assert!(!json.contains(SENTINEL_UID));
    for v in [SENTINEL_X, SENTINEL_U] {
        let mantissa = format!("{v:.11e}").replace('.', "");
        let key = &mantissa[..11];
        assert!(!digits.contains(key), "sentinel {v} found in catalogue");
    }
    for x in ds.numeric("x").unwrap().into_iter().flatten().chain(ds.numeric("u").unwrap().into_iter().flatten()) {
        let m = format!("{x:.8e}").replace('.', "");
        assert!(!digits.contains(&m[..9]), "training value {x} found in catalogue");
    }

    let big = study(100);
    assert_eq!(big.n_rows(), 5000);
    let mut big_cat = study_catalogue(&big);
    let mut cat = cat;
    for c in [&mut cat, &mut big_cat] {
        c.models.sort_by_key(|e| (e.model.family.kind, e.performance.predictors.clone()));
    }
    let json = cat.to_json();
    let small_masked = mask(&json, &cat.dataset_fingerprint);
    let big_masked = mask(&big_cat.to_json(), &big_cat.dataset_fingerprint);
    assert_eq!(small_masked.len(), big_masked.len(), "catalogue size depends on n_train");
    assert_eq!(small_masked, big_masked);
}

// ---------------------------------------------------------------- 7

fn prediction() {
    let xs: Vec<f64> = (0..10).map(|i| i as f64).collect();
    let mut csv = String::from("uid,x\n");
    for (i, x) in xs.iter().enumerate() {
        csv.push_str(&format!("p{i},{x}\n"));
    }
    let dict = "variable,class,min,max,allowed_set,description\nuid,text,,,,id\nx,double,,,,x\n";
    let ds = validate_dataset(&ingest_table(&csv, "NA").unwrap(), &load_dictionary(dict).unwrap(), &DatasetMetadata::new("uid")).unwrap();
    let design = Design::from_columns(&[("x", &xs)]).unwrap();
    let predict = |m: &FittedModel| {
        let req = PredictionRequest { model: m, newdata: &ds, variable_map: default_variable_map(m), utility_bounds: [-1.0, 1.0] };
        predict_utility(&req).unwrap().values
    };

    let mut logit = fit_transformed_ols(&[0.5; 10], &design, chemkit_core::mapping::Transform::Logit, 0.005).unwrap();
    assert!(logit.beta().iter().all(|b| b.abs() < 1e-12));
    for v in logit.coefficients.values_mut() {
        *v = 0.0;
    }
    assert!(predict(&logit).iter().all(|p| *p == Some(0.5)));

    let mut gamma = fit_glm_irls(&[0.8; 10], &design, GlmFamily::GammaLog, 200, 1e-12).unwrap();
    assert!((gamma.coefficients["(Intercept)"] - 0.8f64.ln()).abs() < 1e-10);
    gamma.coefficients["(Intercept)"] = 0.8f64.ln();
    gamma.coefficients["x"] = 0.0;
    assert!(predict(&gamma).iter().all(|p| (p.unwrap() - 0.8).abs() < 1e-15));

    assert_eq!(qaly(1.0, 1.0, 365.25), 1.0);
    assert!((qaly(0.8, 0.6, 182.625) - 0.35).abs() <= 1e-12);

    let mut r = rng(7);
    for _ in 0..1000 {
        let (u1, u2) = (r.random_range(-0.5..1.0), r.random_range(-0.5..1.0));
        let (a, b) = (r.random_range(0.0..2000.0), r.random_range(0.0..2000.0));
        let c: f64 = r.random_range(0.0..10.0);
        let whole = qaly(u1, u2, a + b);
        let tol = 1e-12 * whole.abs().max(1.0);
        assert!((whole - qaly(u1, u2, a) - qaly(u1, u2, b)).abs() <= tol);
        assert!((qaly(u1, u2, c * a) - c * qaly(u1, u2, a)).abs() <= 1e-12 * (c * qaly(u1, u2, a)).abs().max(1.0));
    }
}

// ---------------------------------------------------------------- 8

fn run_toy(dir: &Path, manifest: &Path) -> Output {
    chemkit(&["run", "--manifest", manifest.to_str().unwrap(), "--out", dir.to_str().unwrap()])
}

fn replication() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = toy("manifest.json");
    let m: Value = serde_json::from_str(&read(&manifest)).unwrap();
    let chain: Vec<String> = m["steps"].as_array().unwrap().iter().map(|s| format!("{}.{}", s["module"].as_str().unwrap(), s["verb"].as_str().unwrap())).collect();
    for needed in ["data.ingest", "data.validate", "scoring.score", "mapping.evaluate", "mapping.export"] {
        assert!(chain.iter().any(|c| c == needed), "manifest lacks {needed}");
    }
    assert_eq!(chain.iter().filter(|c| *c == "report.report").count(), 2);

    let mut hashes = vec![];
    for name in ["a", "b"] {
        let out = run_toy(&tmp.path().join(name), &manifest);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        hashes.push(String::from_utf8(out.stdout).unwrap());
    }
    assert_eq!(hashes[0], hashes[1]);
    let files: BTreeSet<_> = fs::read_dir(tmp.path().join("a")).unwrap().map(|e| e.unwrap().file_name()).collect();
    let files_b: BTreeSet<_> = fs::read_dir(tmp.path().join("b")).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(files, files_b);
    for f in &files {
        if f == "run_record.json" {
            continue;
        }
        assert_eq!(fs::read(tmp.path().join("a").join(f)).unwrap(), fs::read(tmp.path().join("b").join(f)).unwrap(), "{f:?} differs");
    }
    let record: RunRecord = serde_json::from_str(&read(&tmp.path().join("a/run_record.json"))).unwrap();
    let cat = ModelCatalogue::from_json(&read(&tmp.path().join("a/catalogue.json"))).unwrap();
    let families: HashSet<_> = cat.models.iter().map(|e| e.model.family.kind).collect();
    assert_eq!(families.len(), 6, "six families fitted");
    assert_eq!(record.hash(), hashes[0].trim());

    let corrupt = tmp.path().join("corrupt");
    fs::create_dir_all(&corrupt).unwrap();
    for f in ["dictionary.csv", "instrument.json", "manifest.json"] {
        fs::copy(toy(f), corrupt.join(f)).unwrap();
    }
    let records = read(&toy("records.csv"));
    let mut lines: Vec<String> = records.lines().map(String::from).collect();
    let mut cells: Vec<String> = lines[5].split(',').map(String::from).collect();
    cells[6] = "99".into();
    lines[5] = cells.join(",");
    fs::write(corrupt.join("records.csv"), lines.join("\n") + "\n").unwrap();
    let out_dir = tmp.path().join("c");
    let out = run_toy(&out_dir, &corrupt.join("manifest.json"));
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    let record: RunRecord = serde_json::from_str(&read(&out_dir.join("run_record.json"))).unwrap();
    let failed = record.failed_step().expect("a step failed");
    let validate_id = m["steps"].as_array().unwrap().iter().find(|s| s["verb"] == "validate").unwrap()["step_id"].as_str().unwrap();
    assert_eq!(failed.step_id, validate_id);
    let ok = record.steps.iter().filter(|s| s.status == StepStatus::Ok).count();
    let skipped = record.steps.iter().filter(|s| s.status == StepStatus::Skipped).count();
    assert_eq!((ok, skipped), (1, record.steps.len() - 2));
}

// ---------------------------------------------------------------- 9

fn registry() {
    let dir = tempfile::tempdir().unwrap();
    let reg = LocalRegistry::open(dir.path()).unwrap();
    let mut r = rng(9);
    let mut last = reg.index().unwrap().index_version;
    for i in 0..100 {
        let len = r.random_range(0..4096);
        let blob: Vec<u8> = (0..len).map(|_| r.random()).collect();
        let kind = [ArtifactKind::Module, ArtifactKind::Program, ArtifactKind::Catalogue][i % 3];
        reg.publish(&blob, PublishMeta::new(&format!("blob-{i}"), kind, "1.0.0".parse().unwrap())).unwrap();
        let (bytes, _) = reg.fetch(&format!("blob-{i}"), "1.0.0").unwrap();
        assert_eq!(bytes, blob);
        let v = reg.index().unwrap().index_version;
        assert!(v > last);
        last = v;
    }
    let dup = reg.publish(b"x", PublishMeta::new("blob-0", ArtifactKind::Module, "1.0.0".parse().unwrap()));
    assert!(matches!(dup, Err(RegistryError::Duplicate { .. })));
    assert_eq!(reg.index().unwrap().index_version, last);

    let victim = reg.index().unwrap().resolve("blob-7", "latest").unwrap().clone();
    let path = dir.path().join(&victim.location);
    let mut bytes = fs::read(&path).unwrap();
    bytes.push(0);
    fs::write(&path, bytes).unwrap();
    assert!(matches!(reg.fetch("blob-7", "latest"), Err(RegistryError::Integrity { .. })));

    let meta = |v: &str| PublishMeta::new("mapper", ArtifactKind::Module, v.parse().unwrap()).keywords(&["Utility", "Mapping"]);
    reg.publish(b"one", meta("1.0.0")).unwrap();
    reg.publish(b"two", meta("1.2.0")).unwrap();
    reg.publish(b"three", meta("1.10.0")).unwrap();
    assert_eq!(reg.fetch("mapper", "latest").unwrap().0, b"three");
    reg.deprecate("mapper", "1.10.0".parse().unwrap()).unwrap();
    assert_eq!(reg.fetch("mapper", "latest").unwrap().0, b"two");
    assert!(reg.index().unwrap().index_version > last);

    let hits = reg.search("uTILITY", None, false).unwrap();
    assert_eq!(hits.len(), 2);
    assert_eq!(reg.search("MAPPER", Some(ArtifactKind::Module), true).unwrap().len(), 3);
    assert!(reg.search("mapping", Some(ArtifactKind::Dataset), true).unwrap().is_empty());
}

// ---------------------------------------------------------------- 10

fn synthesis() {
    let ds = toy_dataset();
    let syn = synthesize_dataset(&ds, 1000, 10).unwrap();
    assert_eq!(syn.n_rows(), 1000);
    assert_eq!(syn.to_json(), synthesize_dataset(&ds, 1000, 10).unwrap().to_json());
    assert_ne!(syn.to_json(), synthesize_dataset(&ds, 1000, 11).unwrap().to_json());

    let again = validate_dataset(&syn.to_raw(), ds.dictionary(), ds.metadata()).unwrap();
    assert_eq!(again.n_rows(), 1000);

    let source: HashSet<String> = ds.uids().into_iter().flatten().collect();
    assert!(syn.uids().into_iter().flatten().all(|u| !source.contains(&u)));

    let stats = |v: &[f64]| {
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        (mean, (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt())
    };
    let mut checked = 0;
    for (name, col) in ds.columns() {
        if !matches!(col, Column::Integer(_) | Column::Double(_)) {
            continue;
        }
        let src: Vec<f64> = ds.numeric(name).unwrap().into_iter().flatten().collect();
        let out: Vec<f64> = syn.numeric(name).unwrap().into_iter().flatten().collect();
        let (mu, sd) = stats(&src);
        let (m, _) = stats(&out);
        let se = sd / (out.len() as f64).sqrt();
        assert!((m - mu).abs() <= 3.0 * se, "{name}: synthetic mean {m} vs source {mu} (SE {se})");
        checked += 1;
    }
    assert!(checked >= 8, "{checked} numeric variables");
}
