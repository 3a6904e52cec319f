use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::context::{catalogue_context, summary_context};
use super::manifest::{PipelineManifest, PipelineStep};
use super::template::{render_template, RenderContext, ReportTemplate};
use super::ReportError;
use crate::data::{
    describe_dataset, ingest_table, load_dictionary, synthesize_dataset, validate_dataset, DatasetMetadata, DescriptiveSummary,
    DictionaryEntry, Stratify, ValidatedDataset, VarClass, DEFAULT_MISSING_MARKER,
};
use crate::hash::sha256_hex;
use crate::mapping::{
    build_catalogue, evaluate_candidates, performance_csv, specify_candidates, CatalogueEntry, CatalogueMeta, ModelCatalogue,
    ModelKind, PerformanceRecord,
};
use crate::modules::Verb;
use crate::predict::{compute_qalys, default_variable_map, predict_utility, qaly_csv, PredictionRequest, QalySpec};
use crate::scoring::{attach_instrument, score_dataset, InstrumentDefinition, TOTAL_UTILITY};
use crate::Error;

pub const RUN_RECORD_FILE: &str = "run_record.json";
/// Timestamp written into catalogues built by manifests unless overridden.
pub const DEFAULT_CREATED_UTC: &str = "1970-01-01T00:00:00Z";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StepStatus {
    Ok,
    Failed,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step_id: String,
    pub module: String,
    pub verb: Verb,
    pub status: StepStatus,
    pub input_hashes: IndexMap<String, String>,
    pub output_hashes: IndexMap<String, String>,
    pub duration_ms: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub toolkit_version: String,
    pub seed: u64,
    pub manifest_hash: String,
    pub status: StepStatus,
    /// Sorted by step id.
    pub steps: Vec<StepRecord>,
}

impl RunRecord {
    pub fn to_json(&self) -> String {
        crate::json::to_canonical_string(self).expect("run record serializes")
    }

    /// Content hash of the record with timings zeroed, so reruns on the same
    /// inputs hash identically.
    pub fn hash(&self) -> String {
        let mut r = self.clone();
        for s in &mut r.steps {
            s.duration_ms = 0;
        }
        sha256_hex(r.to_json().as_bytes())
    }

    pub fn failed_step(&self) -> Option<&StepRecord> {
        self.steps.iter().find(|s| s.status == StepStatus::Failed)
    }
}

struct StepOutput {
    files: Vec<Vec<u8>>,
    warnings: Vec<String>,
}

struct Runner<'a> {
    manifest: &'a PipelineManifest,
    base: &'a Path,
    workdir: &'a Path,
}

/// Executes the manifest in dependency order, writing every output and
/// `run_record.json` under `workdir`. External inputs resolve against
/// `base`. The first failing step halts the run; the returned error carries
/// the run record.
pub fn run_manifest(manifest: &PipelineManifest, base: &Path, workdir: &Path) -> Result<RunRecord, Error> {
    fs::create_dir_all(workdir)?;
    let order = manifest.execution_order()?;
    let runner = Runner { manifest, base, workdir };
    let mut records: Vec<Option<StepRecord>> = vec![None; manifest.steps.len()];
    let mut failure: Option<(String, Error)> = None;
    for &i in &order {
        let step = &manifest.steps[i];
        if failure.is_some() {
            records[i] = Some(blank_record(step, StepStatus::Skipped));
            continue;
        }
        let start = Instant::now();
        let mut rec = blank_record(step, StepStatus::Ok);
        match runner.run_step(step, &mut rec) {
            Ok(()) => {}
            Err(e) => {
                rec.status = StepStatus::Failed;
                rec.error = Some(e.to_string());
                failure = Some((step.step_id.clone(), e));
            }
        }
        rec.duration_ms = start.elapsed().as_millis() as u64;
        records[i] = Some(rec);
    }
    let mut steps: Vec<StepRecord> = records.into_iter().map(|r| r.expect("every step recorded")).collect();
    steps.sort_by(|a, b| a.step_id.cmp(&b.step_id));
    let record = RunRecord {
        toolkit_version: manifest.toolkit_version.clone(),
        seed: manifest.seed,
        manifest_hash: sha256_hex(manifest.to_json().as_bytes()),
        status: if failure.is_some() { StepStatus::Failed } else { StepStatus::Ok },
        steps,
    };
    fs::write(workdir.join(RUN_RECORD_FILE), record.to_json())?;
    match failure {
        None => Ok(record),
        Some((step_id, source)) => {
            Err(ReportError::StepFailed { step_id, source: Box::new(source), record: Box::new(record) }.into())
        }
    }
}

fn blank_record(step: &PipelineStep, status: StepStatus) -> StepRecord {
    StepRecord {
        step_id: step.step_id.clone(),
        module: step.module.clone(),
        verb: step.verb,
        status,
        input_hashes: IndexMap::new(),
        output_hashes: IndexMap::new(),
        duration_ms: 0,
        warnings: vec![],
        error: None,
    }
}

fn step_err(step: &PipelineStep, message: impl Into<String>) -> Error {
    ReportError::Step { step_id: step.step_id.clone(), message: message.into() }.into()
}

impl Runner<'_> {
    fn input_path(&self, name: &str) -> PathBuf {
        if self.manifest.producers().contains_key(name) {
            self.workdir.join(name)
        } else {
            self.base.join(name)
        }
    }

    fn run_step(&self, step: &PipelineStep, rec: &mut StepRecord) -> Result<(), Error> {
        let mut inputs = Vec::with_capacity(step.inputs.len());
        for name in &step.inputs {
            let bytes = fs::read(self.input_path(name)).map_err(|e| step_err(step, format!("reading {name}: {e}")))?;
            rec.input_hashes.insert(name.clone(), sha256_hex(&bytes));
            inputs.push(Input { name: name.clone(), bytes });
        }
        let ctx = StepCtx { step, inputs, seed: self.manifest.seed };
        let out = execute(&ctx)?;
        if out.files.len() < step.outputs.len() {
            return Err(step_err(step, format!("declares {} outputs but produces at most {}", step.outputs.len(), out.files.len())));
        }
        for (name, bytes) in step.outputs.iter().zip(&out.files) {
            fs::write(self.workdir.join(name), bytes)?;
            rec.output_hashes.insert(name.clone(), sha256_hex(bytes));
        }
        rec.warnings = out.warnings;
        Ok(())
    }
}

struct Input {
    name: String,
    bytes: Vec<u8>,
}

impl Input {
    fn text(&self) -> Result<&str, Error> {
        std::str::from_utf8(&self.bytes).map_err(|_| Error::Report(ReportError::Manifest(format!("{} is not UTF-8", self.name))))
    }
}

struct StepCtx<'a> {
    step: &'a PipelineStep,
    inputs: Vec<Input>,
    seed: u64,
}

impl StepCtx<'_> {
    fn err(&self, message: impl Into<String>) -> Error {
        step_err(self.step, message)
    }

    fn input(&self, i: usize, what: &str) -> Result<&Input, Error> {
        self.inputs.get(i).ok_or_else(|| self.err(format!("input {} ({what}) is required", i + 1)))
    }

    fn param(&self, key: &str) -> Option<&Value> {
        self.step.params.get(key)
    }

    fn str_param(&self, key: &str) -> Result<Option<String>, Error> {
        match self.param(key) {
            None | Some(Value::Null) => Ok(None),
            Some(Value::String(s)) => Ok(Some(s.clone())),
            Some(Value::Number(n)) => Ok(Some(n.to_string())),
            Some(_) => Err(self.err(format!("param '{key}' must be a string"))),
        }
    }

    fn bool_param(&self, key: &str, default: bool) -> Result<bool, Error> {
        match self.param(key) {
            None => Ok(default),
            Some(Value::Bool(b)) => Ok(*b),
            Some(_) => Err(self.err(format!("param '{key}' must be true or false"))),
        }
    }

    fn u64_param(&self, key: &str) -> Result<Option<u64>, Error> {
        match self.param(key) {
            None => Ok(None),
            Some(v) => v.as_u64().map(Some).ok_or_else(|| self.err(format!("param '{key}' must be a non-negative integer"))),
        }
    }

    fn list_param(&self, key: &str) -> Result<Vec<String>, Error> {
        match self.param(key) {
            None => Ok(vec![]),
            Some(Value::Array(items)) => items
                .iter()
                .map(|v| v.as_str().map(str::to_string).ok_or_else(|| self.err(format!("param '{key}' must list strings"))))
                .collect(),
            Some(_) => Err(self.err(format!("param '{key}' must be a list"))),
        }
    }

    fn marker(&self) -> Result<String, Error> {
        Ok(self.str_param("missing_marker")?.unwrap_or_else(|| DEFAULT_MISSING_MARKER.into()))
    }

    fn dataset(&self, i: usize) -> Result<ValidatedDataset, Error> {
        ValidatedDataset::from_json(self.input(i, "dataset")?.text()?)
    }

    fn instrument(&self, i: usize) -> Result<Option<InstrumentDefinition>, Error> {
        match self.inputs.get(i) {
            None => Ok(None),
            Some(inp) => Ok(Some(InstrumentDefinition::from_json(inp.text()?)?)),
        }
    }

    fn seed(&self) -> Result<u64, Error> {
        Ok(self.u64_param("seed")?.unwrap_or(self.seed))
    }
}

fn done(files: Vec<String>) -> StepOutput {
    StepOutput { files: files.into_iter().map(String::into_bytes).collect(), warnings: vec![] }
}

fn execute(c: &StepCtx<'_>) -> Result<StepOutput, Error> {
    match (c.step.module.as_str(), c.step.verb) {
        ("data", Verb::Ingest) => {
            let marker = c.marker()?;
            let raw = ingest_table(c.input(0, "records csv")?.text()?, &marker)?;
            Ok(done(vec![raw.to_csv(&marker)]))
        }
        ("data", Verb::Validate) => {
            let marker = c.marker()?;
            let raw = ingest_table(c.input(0, "records csv")?.text()?, &marker)?;
            let dict = load_dictionary(c.input(1, "dictionary csv")?.text()?)?;
            let mut meta = DatasetMetadata::new(&c.str_param("uid")?.unwrap_or_else(|| "uid".into()));
            if let Some(r) = c.str_param("round")? {
                meta = meta.with_round(&r);
            }
            if let Some(g) = c.str_param("group")? {
                meta = meta.with_group(&g);
            }
            let ds = validate_dataset(&raw, &dict, &meta)?;
            Ok(done(vec![ds.to_json()]))
        }
        ("data", Verb::Describe) => {
            let ds = c.dataset(0)?;
            let strat = Stratify { by_group: c.bool_param("by_group", false)?, by_round: c.bool_param("by_round", false)? };
            let s = describe_dataset(&ds, strat)?;
            Ok(done(vec![s.to_json(), s.to_text()]))
        }
        ("data", Verb::Transform) => {
            let ds = c.dataset(0)?;
            let n = c.u64_param("n")?.map(|n| n as usize).unwrap_or(ds.n_rows());
            let syn = synthesize_dataset(&ds, n, c.seed()?)?;
            Ok(done(vec![syn.to_json()]))
        }
        ("scoring", Verb::Score) => {
            let ds = c.dataset(0)?;
            let inst = c.instrument(1)?.ok_or_else(|| c.err("input 2 (instrument json) is required"))?;
            let scored = score_dataset(&attach_instrument(&ds, &inst)?, c.bool_param("weighted", true)?)?;
            let mut out = done(vec![scored.to_dataset()?.to_json()]);
            if scored.clamp_count > 0 {
                out.warnings.push(format!("{} utilities clamped to instrument bounds", scored.clamp_count));
            }
            Ok(out)
        }
        ("mapping", Verb::Evaluate) => {
            let ds = c.dataset(0)?;
            let target = c.str_param("target")?.unwrap_or_else(|| TOTAL_UTILITY.into());
            let predictors = c.list_param("predictors")?;
            let covariates = c.list_param("covariates")?;
            let families = c
                .list_param("families")?
                .iter()
                .map(|f| f.parse::<ModelKind>())
                .collect::<Result<Vec<_>, _>>()?;
            let folds = c.u64_param("folds")?.unwrap_or(5) as usize;
            let predictors: Vec<&str> = predictors.iter().map(String::as_str).collect();
            let covariates: Vec<&str> = covariates.iter().map(String::as_str).collect();
            let spec = specify_candidates(&ds, &target, &predictors, &covariates, &families, folds, c.seed()?)?;
            let entries = evaluate_candidates(&ds, &spec)?;
            let perf: Vec<PerformanceRecord> = entries.iter().map(|e| e.performance.clone()).collect();
            Ok(done(vec![crate::json::to_canonical_string(&entries)?, performance_csv(&perf)]))
        }
        ("mapping", Verb::Export) => {
            let entries: Vec<CatalogueEntry> = serde_json::from_str(c.input(0, "models json")?.text()?)?;
            let ds = c.dataset(1)?;
            let instrument = match c.instrument(2)? {
                Some(i) => i.name,
                None => c.str_param("instrument")?.ok_or_else(|| c.err("give an instrument input or an 'instrument' param"))?,
            };
            let top = c.u64_param("top")?.map(|n| n as usize).unwrap_or(entries.len());
            let mut meta = CatalogueMeta::new(&ds, &instrument)
                .created_at(&c.str_param("created_utc")?.unwrap_or_else(|| DEFAULT_CREATED_UTC.into()));
            meta.identifier = c.str_param("identifier")?;
            let cat = build_catalogue(entries.into_iter().take(top).collect(), meta)?;
            Ok(done(vec![cat.to_json()]))
        }
        ("report", Verb::Report) => report_step(c),
        ("predict", Verb::Predict) => {
            let cat = ModelCatalogue::from_json(c.input(0, "catalogue json")?.text()?)?;
            let ds = c.dataset(1)?;
            let idx = c.u64_param("model")?.unwrap_or(0) as usize;
            let entry = cat.models.get(idx).ok_or_else(|| c.err(format!("catalogue has no model {idx}")))?;
            let bounds = match (c.instrument(2)?, c.param("utility_bounds")) {
                (_, Some(v)) => serde_json::from_value::<[f64; 2]>(v.clone()).map_err(|_| c.err("utility_bounds must be [lo, hi]"))?,
                (Some(inst), None) => inst.utility_bounds(),
                (None, None) => return Err(c.err("give an instrument input or 'utility_bounds'")),
            };
            let variable_map = match c.param("variable_map") {
                Some(v) => serde_json::from_value(v.clone()).map_err(|_| c.err("variable_map must map names to columns"))?,
                None => default_variable_map(&entry.model),
            };
            let req = PredictionRequest { model: &entry.model, newdata: &ds, variable_map, utility_bounds: bounds };
            let pred = predict_utility(&req)?;
            let column = c.str_param("column")?.unwrap_or_else(|| "predicted_utility".into());
            let cells = pred.values.iter().map(|v| v.map(|x| x.to_string())).collect();
            let entry_dict = DictionaryEntry::numeric(&column, VarClass::Double, Some(bounds[0]), Some(bounds[1]), "predicted utility");
            let with_pred = ds.with_columns(vec![(entry_dict, cells)])?;
            let mut out = done(vec![pred.to_csv(&ds), with_pred.to_json()]);
            if pred.clamp_count > 0 {
                out.warnings.push(format!("{} predictions clamped to utility bounds", pred.clamp_count));
            }
            Ok(out)
        }
        ("predict", Verb::Transform) => {
            let ds = c.dataset(0)?;
            let mut spec = QalySpec::new(
                &c.str_param("utility")?.unwrap_or_else(|| "predicted_utility".into()),
                &c.str_param("time_var")?.unwrap_or_else(|| "date".into()),
            );
            if let Some(r) = c.str_param("start_round")? {
                spec.start_round = r;
            }
            if let Some(r) = c.str_param("end_round")? {
                spec.end_round = r;
            }
            let res = compute_qalys(&ds, &spec)?;
            let mut out = done(vec![qaly_csv(&res.records)]);
            if !res.skipped.is_empty() {
                out.warnings.push(format!("skipped uids without both rounds: {}", res.skipped.join(", ")));
            }
            Ok(out)
        }
        (m, v) => Err(c.err(format!("{m}.{v} cannot run in a manifest"))),
    }
}

fn report_step(c: &StepCtx<'_>) -> Result<StepOutput, Error> {
    let mut template = None;
    let mut ctx = RenderContext::new();
    for inp in &c.inputs {
        if inp.name.ends_with(".md") {
            template = Some(ReportTemplate::parse(inp.text()?)?);
        } else if let Ok(cat) = serde_json::from_str::<ModelCatalogue>(inp.text()?) {
            ctx.extend(catalogue_context(&cat));
        } else if let Ok(s) = serde_json::from_str::<DescriptiveSummary>(inp.text()?) {
            ctx.extend(summary_context(&s));
        } else {
            return Err(c.err(format!("input {} is neither a template, a catalogue nor a summary", inp.name)));
        }
    }
    let template = match template {
        Some(t) => t,
        None => ReportTemplate::by_name(&c.str_param("template")?.unwrap_or_else(|| "catalogue".into()))?,
    };
    for (k, v) in &c.step.params {
        match (k.as_str(), v) {
            ("template", _) => {}
            (_, Value::String(s)) => {
                ctx.text(k, s.clone());
            }
            (_, Value::Number(n)) => {
                ctx.number(k, n.as_f64().unwrap_or_default());
            }
            _ => return Err(c.err(format!("param '{k}' must be text or a number"))),
        }
    }
    let rendered = render_template(&template, &ctx)?;
    let mut text = rendered.text;
    if !text.ends_with('\n') {
        text.push('\n');
    }
    Ok(StepOutput { files: vec![text.into_bytes()], warnings: rendered.warnings })
}
