use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::engines::{score_additive, score_multiplicative, AdditiveParams, MultiplicativeParams};
use super::ScoringError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Item {
    pub item_id: String,
    pub variable: String,
    pub levels: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub domain_id: String,
    pub item_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Engine {
    AdditiveDecrement(AdditiveParams),
    MultiplicativeDomain(MultiplicativeParams),
    /// Scored by a [`CustomScorer`] registered under this name.
    Custom { scorer: String },
}

/// A user-supplied scoring function over item levels.
pub trait CustomScorer: Send + Sync {
    fn name(&self) -> &str;
    fn score(&self, state: &[u32]) -> f64;
}

/// Adapts a closure into a [`CustomScorer`].
pub struct FnScorer<F> {
    name: String,
    f: F,
}

impl<F: Fn(&[u32]) -> f64 + Send + Sync> FnScorer<F> {
    pub fn new(name: &str, f: F) -> Self {
        Self { name: name.to_string(), f }
    }
}

impl<F: Fn(&[u32]) -> f64 + Send + Sync> CustomScorer for FnScorer<F> {
    fn name(&self) -> &str {
        &self.name
    }
    fn score(&self, state: &[u32]) -> f64 {
        (self.f)(state)
    }
}

/// Instrument metadata and scoring parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "InstrumentFile", into = "InstrumentFile")]
pub struct InstrumentDefinition {
    pub name: String,
    pub version: String,
    pub country: String,
    items: Vec<Item>,
    domains: Vec<Domain>,
    engine: Engine,
    utility_bounds: [f64; 2],
    /// Domain index of each item.
    item_domain: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum EngineKind {
    AdditiveDecrement,
    MultiplicativeDomain,
    Custom,
}

#[derive(Serialize, Deserialize)]
struct InstrumentFile {
    name: String,
    version: String,
    country: String,
    items: Vec<Item>,
    domains: Vec<Domain>,
    engine: EngineKind,
    params: Value,
    utility_bounds: [f64; 2],
}

impl TryFrom<InstrumentFile> for InstrumentDefinition {
    type Error = ScoringError;

    fn try_from(f: InstrumentFile) -> Result<Self, ScoringError> {
        let def = |m: String| ScoringError::Definition(m);
        let engine = match f.engine {
            EngineKind::AdditiveDecrement => {
                Engine::AdditiveDecrement(serde_json::from_value(f.params).map_err(|e| def(format!("params: {e}")))?)
            }
            EngineKind::MultiplicativeDomain => Engine::MultiplicativeDomain(
                serde_json::from_value(f.params).map_err(|e| def(format!("params: {e}")))?,
            ),
            EngineKind::Custom => {
                let scorer = f
                    .params
                    .get("scorer")
                    .and_then(Value::as_str)
                    .ok_or_else(|| def("custom engine params need a 'scorer' name".into()))?;
                Engine::Custom { scorer: scorer.to_string() }
            }
        };
        InstrumentDefinition::new(&f.name, &f.version, &f.country, f.items, f.domains, engine, f.utility_bounds)
    }
}

impl From<InstrumentDefinition> for InstrumentFile {
    fn from(d: InstrumentDefinition) -> Self {
        let (engine, params) = match d.engine {
            Engine::AdditiveDecrement(p) => (EngineKind::AdditiveDecrement, serde_json::to_value(p)),
            Engine::MultiplicativeDomain(p) => (EngineKind::MultiplicativeDomain, serde_json::to_value(p)),
            Engine::Custom { scorer } => (EngineKind::Custom, Ok(serde_json::json!({ "scorer": scorer }))),
        };
        InstrumentFile {
            name: d.name,
            version: d.version,
            country: d.country,
            items: d.items,
            domains: d.domains,
            engine,
            params: params.expect("params serialize"),
            utility_bounds: d.utility_bounds,
        }
    }
}

impl InstrumentDefinition {
    pub fn new(
        name: &str,
        version: &str,
        country: &str,
        items: Vec<Item>,
        domains: Vec<Domain>,
        engine: Engine,
        utility_bounds: [f64; 2],
    ) -> Result<Self, ScoringError> {
        let def = |m: String| Err(ScoringError::Definition(m));
        if items.is_empty() {
            return def("instrument has no items".into());
        }
        let mut ids = HashSet::new();
        for it in &items {
            if it.levels < 2 {
                return def(format!("item {}: needs at least 2 levels", it.item_id));
            }
            if !ids.insert(it.item_id.as_str()) {
                return def(format!("duplicate item id '{}'", it.item_id));
            }
        }
        let index: HashMap<&str, usize> = items.iter().enumerate().map(|(i, it)| (it.item_id.as_str(), i)).collect();
        let mut item_domain = vec![usize::MAX; items.len()];
        let mut domain_items = Vec::with_capacity(domains.len());
        let mut domain_ids = HashSet::new();
        for (d, dom) in domains.iter().enumerate() {
            if !domain_ids.insert(dom.domain_id.as_str()) {
                return def(format!("duplicate domain id '{}'", dom.domain_id));
            }
            if dom.item_ids.is_empty() {
                return def(format!("domain {} is empty", dom.domain_id));
            }
            let mut members = Vec::new();
            for id in &dom.item_ids {
                let &i = index.get(id.as_str()).ok_or_else(|| {
                    ScoringError::Definition(format!("domain {} refers to unknown item '{id}'", dom.domain_id))
                })?;
                if item_domain[i] != usize::MAX {
                    return def(format!("item {id} belongs to more than one domain"));
                }
                item_domain[i] = d;
                members.push(i);
            }
            domain_items.push(members);
        }
        if let Some(i) = item_domain.iter().position(|&d| d == usize::MAX) {
            return def(format!("item {} belongs to no domain", items[i].item_id));
        }
        let [lower, upper] = utility_bounds;
        if upper != 1.0 {
            return def(format!("upper utility bound must be 1.0 (full health), got {upper}"));
        }
        if !(lower.is_finite() && lower < upper) {
            return def(format!("lower utility bound {lower} must be below 1.0"));
        }
        let levels: Vec<u32> = items.iter().map(|it| it.levels).collect();
        let engine = match engine {
            Engine::AdditiveDecrement(p) => {
                if p.levels() != levels {
                    return def(format!("decrement table shape {:?} does not match item levels {levels:?}", p.levels()));
                }
                Engine::AdditiveDecrement(p)
            }
            Engine::MultiplicativeDomain(p) => {
                if p.levels() != levels {
                    return def(format!("item weight shape {:?} does not match item levels {levels:?}", p.levels()));
                }
                if !p.domains().is_empty() && p.domains() != domain_items.as_slice() {
                    return def("multiplicative params domains disagree with instrument domains".into());
                }
                Engine::MultiplicativeDomain(p.with_domains(domain_items)?)
            }
            custom => custom,
        };
        Ok(Self {
            name: name.into(),
            version: version.into(),
            country: country.into(),
            items,
            domains,
            engine,
            utility_bounds,
            item_domain,
        })
    }

    pub fn from_json(text: &str) -> Result<Self, ScoringError> {
        serde_json::from_str(text).map_err(|e| ScoringError::Definition(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("instrument serializes")
    }

    pub fn items(&self) -> &[Item] {
        &self.items
    }

    pub fn domains(&self) -> &[Domain] {
        &self.domains
    }

    pub fn engine(&self) -> &Engine {
        &self.engine
    }

    pub fn utility_bounds(&self) -> [f64; 2] {
        self.utility_bounds
    }

    pub(crate) fn item_domain(&self, item: usize) -> usize {
        self.item_domain[item]
    }

    pub(crate) fn check_state(&self, state: &[u32]) -> Result<(), ScoringError> {
        if state.len() != self.items.len() {
            return Err(ScoringError::StateLength { expected: self.items.len(), got: state.len() });
        }
        for (it, &l) in self.items.iter().zip(state) {
            if l < 1 || l > it.levels {
                return Err(ScoringError::Level { item: it.item_id.clone(), level: l as i64, levels: it.levels });
            }
        }
        Ok(())
    }

    /// Raw engine utility for built-in engines (before clamping).
    pub fn raw_utility(&self, state: &[u32]) -> Result<f64, ScoringError> {
        self.check_state(state)?;
        match &self.engine {
            Engine::AdditiveDecrement(p) => score_additive(state, p, 1.0),
            Engine::MultiplicativeDomain(p) => score_multiplicative(state, p),
            Engine::Custom { scorer } => Err(ScoringError::UnknownCustom(scorer.clone())),
        }
    }

    /// Weighted disutility of one domain, for built-in engines.
    pub(crate) fn domain_disutility(&self, domain: usize, state: &[u32]) -> Option<f64> {
        match &self.engine {
            Engine::AdditiveDecrement(p) => Some(
                (0..self.items.len()).filter(|&i| self.item_domain[i] == domain).map(|i| p.decrement(i, state[i])).sum(),
            ),
            Engine::MultiplicativeDomain(p) => Some(p.domain_disutility(domain, state)),
            Engine::Custom { .. } => None,
        }
    }

    /// Clamps to the utility bounds; the flag reports whether clamping happened.
    pub fn clamp(&self, u: f64) -> (f64, bool) {
        let [lo, hi] = self.utility_bounds;
        if u < lo {
            (lo, true)
        } else if u > hi {
            (hi, true)
        } else {
            (u, false)
        }
    }
}
