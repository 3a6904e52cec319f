use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use indexmap::IndexMap;

use chemkit_core::data::{DictionaryEntry, VarClass};
use chemkit_core::mapping::{evaluate_candidates, performance_csv, CatalogueMeta, PerformanceRecord};
use chemkit_core::predict::{default_variable_map, qaly_csv, QalySpec};
use chemkit_core::registry::{ArtifactKind, PublishMeta, REGISTRY_URL_ENV};
use chemkit_core::report::{catalogue_context, summary_context, RenderContext};
use chemkit_core::scoring::TOTAL_UTILITY;
use chemkit_core::{
    attach_instrument, build_catalogue, compute_qalys, describe_dataset, ingest_table, load_dictionary,
    predict_utility, render_template, run_manifest, score_dataset, specify_candidates, synthesize_dataset,
    validate_dataset, DatasetMetadata, DescriptiveSummary, HttpRegistry, InstrumentDefinition, LocalRegistry,
    ModelCatalogue, ModelKind, PipelineManifest, PredictionRequest, Registry, ReportTemplate, Stratify,
    ValidatedDataset,
};

use crate::args::{Cli, Command, DataArgs, RegistryArgs};

/// Where results go: files under `--out`, or stdout for the primary output.
struct Sink {
    out: Option<PathBuf>,
}

impl Sink {
    fn emit(&self, name: &str, body: &str, primary: bool) -> Result<()> {
        match &self.out {
            Some(dir) => {
                fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
                let path = dir.join(name);
                fs::write(&path, body).with_context(|| format!("writing {}", path.display()))?;
                eprintln!("wrote {}", path.display());
            }
            None if primary => print!("{body}"),
            None => {}
        }
        Ok(())
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load_dataset(a: &DataArgs) -> Result<ValidatedDataset> {
    let raw = ingest_table(&read(&a.data)?, &a.missing)?;
    let dict = load_dictionary(&read(&a.dict)?)?;
    let mut meta = DatasetMetadata::new(&a.uid);
    if let Some(r) = &a.round {
        meta = meta.with_round(r);
    }
    if let Some(g) = &a.group {
        meta = meta.with_group(g);
    }
    Ok(validate_dataset(&raw, &dict, &meta)?)
}

fn load_instrument(path: &Path) -> Result<InstrumentDefinition> {
    Ok(InstrumentDefinition::from_json(&read(path)?)?)
}

fn parse_pairs(items: &[String], what: &str) -> Result<IndexMap<String, String>> {
    items
        .iter()
        .map(|s| {
            s.split_once('=')
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                .ok_or_else(|| anyhow!("{what} '{s}' is not of the form key=value"))
        })
        .collect()
}

fn parse_bounds(text: &str) -> Result<[f64; 2]> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    match parts.as_slice() {
        [lo, hi] => {
            let lo: f64 = lo.parse().with_context(|| format!("bad lower bound '{lo}'"))?;
            let hi: f64 = hi.parse().with_context(|| format!("bad upper bound '{hi}'"))?;
            if lo.is_nan() || hi.is_nan() || lo >= hi {
                bail!("bounds must satisfy lo < hi, got {lo},{hi}");
            }
            Ok([lo, hi])
        }
        _ => bail!("--bounds takes lo,hi"),
    }
}

fn open_registry(a: &RegistryArgs) -> Result<Box<dyn Registry>> {
    let location = match &a.registry {
        Some(r) => r.clone(),
        None => std::env::var(REGISTRY_URL_ENV)
            .map_err(|_| anyhow!("no registry given: pass --registry or set {REGISTRY_URL_ENV}"))?,
    };
    if location.starts_with("http://") || location.starts_with("https://") {
        Ok(Box::new(HttpRegistry::new(&location)))
    } else {
        Ok(Box::new(LocalRegistry::open(&location)?))
    }
}

fn entry_line(e: &chemkit_core::RegistryEntry) -> String {
    let flag = if e.deprecated { " (deprecated)" } else { "" };
    format!("{}\t{}\t{}\t{}{}", e.identifier, e.version, e.kind, e.description, flag)
}

pub fn run(cli: Cli) -> Result<()> {
    let sink = Sink { out: cli.out };
    match cli.command {
        Command::Validate { data } => {
            let ds = load_dataset(&data)?;
            eprintln!("{} rows valid against the dictionary (stamp {})", ds.n_rows(), ds.validation_stamp());
            if sink.out.is_some() {
                sink.emit("dataset.json", &ds.to_json(), true)?;
            }
        }
        Command::Describe { data, by_group, by_round } => {
            let ds = load_dataset(&data)?;
            let s = describe_dataset(&ds, Stratify { by_group, by_round })?;
            sink.emit("summary.json", &s.to_json(), false)?;
            sink.emit("summary.txt", &s.to_text(), true)?;
        }
        Command::Synth { data, n, seed } => {
            let ds = load_dataset(&data)?;
            let syn = synthesize_dataset(&ds, n.unwrap_or(ds.n_rows()), seed)?;
            sink.emit("synthetic.csv", &syn.to_raw().to_csv(&data.missing), true)?;
            sink.emit("synthetic_dictionary.csv", &syn.dictionary().to_csv(), false)?;
        }
        Command::Score { data, instrument, unweighted } => {
            let ds = load_dataset(&data)?;
            let inst = load_instrument(&instrument)?;
            let scored = score_dataset(&attach_instrument(&ds, &inst)?, !unweighted)?;
            if scored.clamp_count > 0 {
                eprintln!("warning: {} utilities clamped to instrument bounds", scored.clamp_count);
            }
            let out = scored.to_dataset()?;
            sink.emit("scored.csv", &out.to_raw().to_csv(&data.missing), true)?;
            sink.emit("scored_dictionary.csv", &out.dictionary().to_csv(), false)?;
        }
        Command::Fit { data, instrument, target, predictors, covariates, families, folds, seed, top } => {
            let mut ds = load_dataset(&data)?;
            let mut instrument_name = "unspecified".to_string();
            if let Some(path) = instrument {
                let inst = load_instrument(&path)?;
                ds = score_dataset(&attach_instrument(&ds, &inst)?, true)?.to_dataset()?;
                instrument_name = inst.name.clone();
            }
            let families = families.iter().map(|f| f.parse::<ModelKind>()).collect::<Result<Vec<_>, _>>()?;
            let target = target.unwrap_or_else(|| TOTAL_UTILITY.to_string());
            let p: Vec<&str> = predictors.iter().map(String::as_str).collect();
            let c: Vec<&str> = covariates.iter().map(String::as_str).collect();
            let spec = specify_candidates(&ds, &target, &p, &c, &families, folds, seed)?;
            let entries = evaluate_candidates(&ds, &spec)?;
            let perf: Vec<PerformanceRecord> = entries.iter().map(|e| e.performance.clone()).collect();
            let keep = top.unwrap_or(entries.len());
            let cat = build_catalogue(entries.into_iter().take(keep).collect(), CatalogueMeta::new(&ds, &instrument_name))?;
            sink.emit("performance.csv", &performance_csv(&perf), true)?;
            sink.emit("catalogue.json", &cat.to_json(), false)?;
        }
        Command::Predict { data, catalogue, model, instrument, bounds, map } => {
            let ds = load_dataset(&data)?;
            let cat = ModelCatalogue::from_json(&read(&catalogue)?)?;
            let entry = cat.models.get(model).ok_or_else(|| anyhow!("catalogue has {} models, no model {model}", cat.models.len()))?;
            let utility_bounds = match (bounds, &instrument) {
                (Some(b), _) => parse_bounds(&b)?,
                (None, Some(p)) => load_instrument(p)?.utility_bounds(),
                (None, None) => bail!("give --instrument or --bounds lo,hi"),
            };
            let mut variable_map = default_variable_map(&entry.model);
            variable_map.extend(parse_pairs(&map, "--map")?);
            let req = PredictionRequest { model: &entry.model, newdata: &ds, variable_map, utility_bounds };
            let pred = predict_utility(&req)?;
            if pred.clamp_count > 0 {
                eprintln!("warning: {} predictions clamped to utility bounds", pred.clamp_count);
            }
            sink.emit("predictions.csv", &pred.to_csv(&ds), true)?;
            let dict = DictionaryEntry::numeric("predicted_utility", VarClass::Double, Some(utility_bounds[0]), Some(utility_bounds[1]), "predicted utility");
            let cells = pred.values.iter().map(|v| v.map(|x| x.to_string())).collect();
            sink.emit("predicted.json", &ds.with_columns(vec![(dict, cells)])?.to_json(), false)?;
        }
        Command::Qalys { data, utility, time, start, end } => {
            let ds = load_dataset(&data)?;
            let mut spec = QalySpec::new(&utility, &time);
            spec.start_round = start;
            spec.end_round = end;
            let res = compute_qalys(&ds, &spec)?;
            if !res.skipped.is_empty() {
                eprintln!("warning: skipped uids without both rounds: {}", res.skipped.join(", "));
            }
            sink.emit("qalys.csv", &qaly_csv(&res.records), true)?;
        }
        Command::Report { template, catalogue, summary, set } => {
            let tpl = match ReportTemplate::by_name(&template) {
                Ok(t) => t,
                Err(_) => ReportTemplate::parse(&read(Path::new(&template))?)?,
            };
            let mut ctx = RenderContext::new();
            if let Some(p) = summary {
                let s: DescriptiveSummary = serde_json::from_str(&read(&p)?).context("summary json")?;
                ctx.extend(summary_context(&s));
            }
            if let Some(p) = catalogue {
                ctx.extend(catalogue_context(&ModelCatalogue::from_json(&read(&p)?)?));
            }
            for (k, v) in parse_pairs(&set, "--set")? {
                ctx.text(&k, v);
            }
            let rendered = render_template(&tpl, &ctx)?;
            for w in &rendered.warnings {
                eprintln!("warning: {w}");
            }
            sink.emit("report.md", &rendered.text, true)?;
        }
        Command::Run { manifest } => {
            let base = manifest.parent().map(Path::to_path_buf).unwrap_or_default();
            let m = PipelineManifest::from_json(&read(&manifest)?, &base)?;
            let workdir = sink.out.clone().ok_or_else(|| anyhow!("run needs --out for its outputs"))?;
            let record = run_manifest(&m, &base, &workdir)?;
            println!("{}", record.hash());
        }
        Command::Search { query, kind, include_deprecated, registry } => {
            let reg = open_registry(&registry)?;
            let kind = kind.map(|k| k.parse::<ArtifactKind>()).transpose()?;
            let hits = reg.search(&query, kind, include_deprecated)?;
            let lines: String = hits.iter().map(|e| entry_line(e) + "\n").collect();
            sink.emit("search.tsv", &lines, true)?;
        }
        Command::Publish { file, id, version, kind, keywords, description, citation, confidential, registry } => {
            let root = registry
                .registry
                .clone()
                .or_else(|| std::env::var(REGISTRY_URL_ENV).ok())
                .ok_or_else(|| anyhow!("no registry given: pass --registry or set {REGISTRY_URL_ENV}"))?;
            if root.starts_with("http://") || root.starts_with("https://") {
                bail!("publishing is only supported to a local registry directory");
            }
            let bytes = fs::read(&file).with_context(|| format!("reading {}", file.display()))?;
            let kw: Vec<&str> = keywords.iter().map(String::as_str).collect();
            let mut meta = PublishMeta::new(&id, kind.parse()?, version.parse()?).keywords(&kw).description(&description);
            meta.citation = citation;
            if let Some(c) = confidential {
                meta = meta.confidential(c);
            }
            let entry = LocalRegistry::open(&root)?.publish(&bytes, meta)?;
            println!("{}", entry_line(&entry));
        }
        Command::Fetch { id, version, registry } => {
            let reg = open_registry(&registry)?;
            let (bytes, entry) = reg.fetch(&id, &version)?;
            eprintln!("{}", entry_line(&entry));
            let text = String::from_utf8(bytes).map_err(|_| anyhow!("{id} is not text; use --out"))?;
            sink.emit(&format!("{}-{}", entry.identifier, entry.version), &text, true)?;
        }
    }
    Ok(())
}
