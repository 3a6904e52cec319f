use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::ReportError;
use crate::modules::{toolkit_modules, ModuleError, Verb};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineStep {
    pub step_id: String,
    pub module: String,
    pub verb: Verb,
    #[serde(default)]
    pub inputs: Vec<String>,
    #[serde(default)]
    pub outputs: Vec<String>,
    #[serde(default)]
    pub params: IndexMap<String, Value>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub note: String,
}

impl PipelineStep {
    pub fn new(step_id: &str, module: &str, verb: Verb, inputs: &[&str], outputs: &[&str]) -> Self {
        Self {
            step_id: step_id.into(),
            module: module.into(),
            verb,
            inputs: inputs.iter().map(|s| s.to_string()).collect(),
            outputs: outputs.iter().map(|s| s.to_string()).collect(),
            params: IndexMap::new(),
            note: String::new(),
        }
    }

    pub fn param(mut self, key: &str, value: Value) -> Self {
        self.params.insert(key.into(), value);
        self
    }
}

/// A validated, acyclic replication pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineManifest {
    pub seed: u64,
    pub toolkit_version: String,
    pub steps: Vec<PipelineStep>,
}

/// Module/verb pairs the runner knows how to execute.
pub const RUNNABLE_STEPS: [(&str, Verb); 10] = [
    ("data", Verb::Ingest),
    ("data", Verb::Validate),
    ("data", Verb::Describe),
    ("data", Verb::Transform),
    ("scoring", Verb::Score),
    ("mapping", Verb::Evaluate),
    ("mapping", Verb::Export),
    ("report", Verb::Report),
    ("predict", Verb::Predict),
    ("predict", Verb::Transform),
];

/// Checks step references and returns the manifest. External inputs (not
/// produced by any step) must exist relative to `base`.
pub fn build_manifest(steps: Vec<PipelineStep>, seed: u64, base: &Path) -> Result<PipelineManifest, ReportError> {
    let m = PipelineManifest { seed, toolkit_version: crate::TOOLKIT_VERSION.into(), steps };
    m.check(base)?;
    Ok(m)
}

impl PipelineManifest {
    pub fn from_json(text: &str, base: &Path) -> Result<Self, ReportError> {
        let m: PipelineManifest = serde_json::from_str(text).map_err(|e| ReportError::Manifest(e.to_string()))?;
        m.check(base)?;
        Ok(m)
    }

    pub fn to_json(&self) -> String {
        crate::json::to_canonical_string(self).expect("manifest serializes")
    }

    /// Step index producing each artifact.
    pub(crate) fn producers(&self) -> HashMap<&str, usize> {
        let mut out = HashMap::new();
        for (i, s) in self.steps.iter().enumerate() {
            for o in &s.outputs {
                out.insert(o.as_str(), i);
            }
        }
        out
    }

    fn check(&self, base: &Path) -> Result<(), ReportError> {
        let modules = toolkit_modules();
        let mut ids = BTreeSet::new();
        let mut outputs = BTreeSet::new();
        for s in &self.steps {
            if s.step_id.is_empty() || !ids.insert(s.step_id.as_str()) {
                return Err(ReportError::Manifest(format!("duplicate or empty step id '{}'", s.step_id)));
            }
            let desc = modules
                .get(&s.module)
                .ok_or_else(|| ReportError::Manifest(format!("step {}: unknown module '{}'", s.step_id, s.module)))?;
            if !desc.supported_verbs.contains(&s.verb) {
                let err = ModuleError::UnsupportedVerb {
                    module: s.module.clone(),
                    supported: desc.supported_verbs.iter().map(|v| v.as_str()).collect::<Vec<_>>().join(", "),
                };
                return Err(ReportError::Manifest(format!("step {}: {err}", s.step_id)));
            }
            if !RUNNABLE_STEPS.contains(&(s.module.as_str(), s.verb)) {
                return Err(ReportError::Manifest(format!(
                    "step {}: {}.{} cannot run in a manifest",
                    s.step_id, s.module, s.verb
                )));
            }
            for o in &s.outputs {
                if !safe_name(o) {
                    return Err(ReportError::Manifest(format!("step {}: output '{o}' must be a plain file name", s.step_id)));
                }
                if !outputs.insert(o.as_str()) {
                    return Err(ReportError::Manifest(format!("output '{o}' is produced by more than one step")));
                }
            }
        }
        self.execution_order()?;
        let producers = self.producers();
        for s in &self.steps {
            for i in &s.inputs {
                if !producers.contains_key(i.as_str()) && !base.join(i).is_file() {
                    return Err(ReportError::DanglingInput { step_id: s.step_id.clone(), input: i.clone() });
                }
            }
        }
        Ok(())
    }

    /// Step indices in dependency order; ties keep manifest order.
    pub fn execution_order(&self) -> Result<Vec<usize>, ReportError> {
        let producers = self.producers();
        let n = self.steps.len();
        let deps: Vec<BTreeSet<usize>> = self
            .steps
            .iter()
            .map(|s| s.inputs.iter().filter_map(|i| producers.get(i.as_str()).copied()).collect())
            .collect();
        let mut done = vec![false; n];
        let mut order = Vec::with_capacity(n);
        while order.len() < n {
            let next = (0..n).find(|&i| !done[i] && deps[i].iter().all(|&d| done[d]));
            match next {
                Some(i) => {
                    done[i] = true;
                    order.push(i);
                }
                None => return Err(ReportError::Cycle(self.find_cycle(&deps, &done))),
            }
        }
        Ok(order)
    }

    fn find_cycle(&self, deps: &[BTreeSet<usize>], done: &[bool]) -> String {
        // walk dependencies among unfinished steps until a step repeats
        let start = (0..deps.len()).find(|&i| !done[i]).expect("an unfinished step");
        let mut path = vec![start];
        loop {
            let cur = *path.last().expect("non-empty");
            let next = *deps[cur].iter().find(|&&d| !done[d]).expect("blocked step has an unfinished dependency");
            if let Some(pos) = path.iter().position(|&p| p == next) {
                let mut cycle: Vec<&str> = path[pos..].iter().rev().map(|&i| self.steps[i].step_id.as_str()).collect();
                // rotate so the earliest step in the manifest leads
                let lead = (0..cycle.len()).min_by_key(|&k| self.steps.iter().position(|s| s.step_id == cycle[k])).unwrap_or(0);
                cycle.rotate_left(lead);
                return if cycle.len() == 2 {
                    format!("{}↔{}", cycle[0], cycle[1])
                } else {
                    format!("{}→{}", cycle.join("→"), cycle[0])
                };
            }
            path.push(next);
        }
    }
}

fn safe_name(s: &str) -> bool {
    !s.is_empty() && s != "." && s != ".." && !s.contains(['/', '\\']) && s != "run_record.json"
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn base() -> tempfile::TempDir {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("records.csv"), "uid\nA\n").unwrap();
        std::fs::write(dir.path().join("dict.csv"), "x").unwrap();
        dir
    }

    #[test]
    fn chain_builds() {
        let dir = base();
        let m = build_manifest(
            vec![
                PipelineStep::new("ingest", "data", Verb::Ingest, &["records.csv"], &["raw.csv"]),
                PipelineStep::new("validate", "data", Verb::Validate, &["raw.csv", "dict.csv"], &["ds.json"]),
                PipelineStep::new("score", "scoring", Verb::Score, &["ds.json"], &["scored.json"]),
            ],
            1,
            dir.path(),
        )
        .unwrap();
        assert_eq!(m.steps.len(), 3);
        assert_eq!(m.execution_order().unwrap(), vec![0, 1, 2]);
    }

    #[test]
    fn two_step_cycle_is_named() {
        let dir = base();
        let e = build_manifest(
            vec![
                PipelineStep::new("A", "data", Verb::Describe, &["b.out"], &["a.out"]),
                PipelineStep::new("B", "data", Verb::Describe, &["a.out"], &["b.out"]),
            ],
            1,
            dir.path(),
        )
        .unwrap_err();
        assert_eq!(e.to_string(), "manifest has a cycle: A↔B");
    }

    #[test]
    fn longer_cycle() {
        let dir = base();
        let e = build_manifest(
            vec![
                PipelineStep::new("A", "data", Verb::Describe, &["c"], &["a"]),
                PipelineStep::new("B", "data", Verb::Describe, &["a"], &["b"]),
                PipelineStep::new("C", "data", Verb::Describe, &["b"], &["c"]),
            ],
            1,
            dir.path(),
        )
        .unwrap_err();
        assert_eq!(e.to_string(), "manifest has a cycle: A→B→C→A");
    }

    #[test]
    fn dangling_input() {
        let dir = base();
        let e = build_manifest(vec![PipelineStep::new("v", "data", Verb::Validate, &["ghost.csv"], &["ds.json"])], 1, dir.path())
            .unwrap_err();
        assert_eq!(e.to_string(), "step v: input 'ghost.csv' is neither an existing file nor a step output");
    }

    #[test]
    fn verbs_are_checked() {
        let dir = base();
        let e = build_manifest(vec![PipelineStep::new("x", "report", Verb::Score, &[], &["o"])], 1, dir.path()).unwrap_err();
        assert_eq!(e.to_string(), "manifest: step x: module 'report' supports: report, export");
    }

    proptest! {
        #[test]
        fn order_respects_edges(n in 1usize..25, edges in prop::collection::vec((0usize..25, 0usize..25), 0..60), seed in any::<u64>()) {
            // random DAG: edge i -> j only when i < j, then shuffle manifest order
            let mut steps: Vec<PipelineStep> = (0..n)
                .map(|i| PipelineStep::new(&format!("s{i}"), "data", Verb::Describe, &[], &[&format!("o{i}")]))
                .collect();
            for (a, b) in edges {
                let (a, b) = (a % n, b % n);
                if a < b && !steps[b].inputs.contains(&format!("o{a}")) {
                    steps[b].inputs.push(format!("o{a}"));
                }
            }
            let perm = crate::data::seeded_permutation(n, seed);
            let steps: Vec<PipelineStep> = perm.iter().map(|&i| steps[i].clone()).collect();
            let dir = tempfile::tempdir().unwrap();
            let m = build_manifest(steps, 1, dir.path()).unwrap();
            let order = m.execution_order().unwrap();
            let pos: HashMap<&str, usize> = order.iter().enumerate().map(|(k, &i)| (m.steps[i].step_id.as_str(), k)).collect();
            let producers = m.producers();
            for s in &m.steps {
                for inp in &s.inputs {
                    let p = &m.steps[producers[inp.as_str()]].step_id;
                    prop_assert!(pos[p.as_str()] < pos[s.step_id.as_str()]);
                }
            }
        }
    }
}
