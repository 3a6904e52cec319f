use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use indexmap::IndexMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::Value;

use super::verb::join;
use super::{ModuleError, Verb};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Version {
    pub major: u64,
    pub minor: u64,
    pub patch: u64,
}

impl Version {
    pub const fn new(major: u64, minor: u64, patch: u64) -> Self {
        Self { major, minor, patch }
    }

    pub fn bump(self, bump: Bump) -> Self {
        match bump {
            Bump::Major => Self::new(self.major + 1, 0, 0),
            Bump::Minor => Self::new(self.major, self.minor + 1, 0),
            Bump::Patch => Self::new(self.major, self.minor, self.patch + 1),
        }
    }
}

impl FromStr for Version {
    type Err = ModuleError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ModuleError::BadVersion(s.to_string());
        let parts: Vec<&str> = s.trim_start_matches('v').split('.').collect();
        if parts.len() != 3 {
            return Err(bad());
        }
        let mut nums = [0u64; 3];
        for (slot, part) in nums.iter_mut().zip(&parts) {
            if part.is_empty() || !part.bytes().all(|b| b.is_ascii_digit()) {
                return Err(bad());
            }
            *slot = part.parse().map_err(|_| bad())?;
        }
        Ok(Self::new(nums[0], nums[1], nums[2]))
    }
}

impl fmt::Display for Version {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}.{}", self.major, self.minor, self.patch)
    }
}

impl Serialize for Version {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Version {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bump {
    Major,
    Minor,
    Patch,
}

impl FromStr for Bump {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "major" => Ok(Bump::Major),
            "minor" => Ok(Bump::Minor),
            "patch" => Ok(Bump::Patch),
            other => Err(format!("unknown version bump '{other}'; expected major, minor or patch")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Lifecycle {
    Experimental,
    Stable,
    Deprecated,
}

/// Type of a state slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SlotType {
    Number,
    Integer,
    Text,
    Flag,
    /// Array of rows (objects or arrays).
    Table,
    Any,
}

impl SlotType {
    pub fn accepts(self, v: &Value) -> bool {
        match self {
            SlotType::Any => true,
            _ if v.is_null() => true,
            SlotType::Number => v.is_number(),
            SlotType::Integer => v.is_i64() || v.is_u64(),
            SlotType::Text => v.is_string(),
            SlotType::Flag => v.is_boolean(),
            SlotType::Table => v.is_array(),
        }
    }
}

/// Immutable description of a module: identity, state layout and verbs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModuleDescriptor {
    pub name: String,
    pub version: Version,
    pub parent: Option<String>,
    pub slots: IndexMap<String, SlotType>,
    pub supported_verbs: Vec<Verb>,
    pub lifecycle: Lifecycle,
    pub citation: String,
}

impl ModuleDescriptor {
    pub fn supports(&self, verb: Verb) -> bool {
        self.supported_verbs.contains(&verb)
    }

    pub fn supported_list(&self) -> String {
        join(self.supported_verbs.iter().copied())
    }

    pub fn with_citation(mut self, citation: impl Into<String>) -> Self {
        self.citation = citation.into();
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("descriptor serializes")
    }
}

fn parse_verbs(verbs: &[&str]) -> Result<Vec<Verb>, ModuleError> {
    let mut out = Vec::with_capacity(verbs.len());
    for v in verbs {
        let verb: Verb = v.parse()?;
        if !out.contains(&verb) {
            out.push(verb);
        }
    }
    Ok(out)
}

fn collect_slots(slots: &[(&str, SlotType)]) -> Result<IndexMap<String, SlotType>, ModuleError> {
    let mut map = IndexMap::with_capacity(slots.len());
    for (name, ty) in slots {
        if map.insert(name.to_string(), *ty).is_some() {
            return Err(ModuleError::DuplicateSlot(name.to_string()));
        }
    }
    Ok(map)
}

/// Creates a new experimental descriptor with no parent.
pub fn define_module(
    name: &str,
    slots: &[(&str, SlotType)],
    verbs: &[&str],
    version: &str,
) -> Result<ModuleDescriptor, ModuleError> {
    if name.trim().is_empty() {
        return Err(ModuleError::EmptyName);
    }
    let supported_verbs = parse_verbs(verbs)?;
    let slots = collect_slots(slots)?;
    let version = version.parse()?;
    Ok(ModuleDescriptor {
        name: name.to_string(),
        version,
        parent: None,
        slots,
        supported_verbs,
        lifecycle: Lifecycle::Experimental,
        citation: String::new(),
    })
}

/// Derives a child descriptor. Slots in `slot_overrides` replace parent
/// slots of the same name; other parent slots and all parent verbs carry over.
pub fn inherit_module(
    parent: &ModuleDescriptor,
    name: &str,
    slot_overrides: &[(&str, SlotType)],
    extra_verbs: &[&str],
) -> Result<ModuleDescriptor, ModuleError> {
    if parent.lifecycle == Lifecycle::Deprecated {
        return Err(ModuleError::DeprecatedParent(parent.name.clone()));
    }
    if name.trim().is_empty() {
        return Err(ModuleError::EmptyName);
    }
    let overrides = collect_slots(slot_overrides)?;
    let mut slots = parent.slots.clone();
    for (k, v) in overrides {
        slots.insert(k, v);
    }
    let mut supported_verbs = parent.supported_verbs.clone();
    for v in parse_verbs(extra_verbs)? {
        if !supported_verbs.contains(&v) {
            supported_verbs.push(v);
        }
    }
    Ok(ModuleDescriptor {
        name: name.to_string(),
        version: parent.version,
        parent: Some(parent.name.clone()),
        slots,
        supported_verbs,
        lifecycle: Lifecycle::Experimental,
        citation: parent.citation.clone(),
    })
}

/// Bumps the version (resetting lower components) and optionally moves the
/// lifecycle. Deprecation cannot be undone.
pub fn renew(
    descriptor: &ModuleDescriptor,
    bump: Bump,
    lifecycle: Option<Lifecycle>,
) -> Result<ModuleDescriptor, ModuleError> {
    if descriptor.lifecycle == Lifecycle::Deprecated
        && lifecycle.is_some_and(|l| l != Lifecycle::Deprecated)
    {
        return Err(ModuleError::Undeprecate(descriptor.name.clone()));
    }
    let mut next = descriptor.clone();
    next.version = descriptor.version.bump(bump);
    if let Some(l) = lifecycle {
        next.lifecycle = l;
    }
    Ok(next)
}

/// A set of descriptors with unique names.
#[derive(Debug, Clone, Default)]
pub struct ModuleCollection {
    modules: HashMap<String, ModuleDescriptor>,
    order: Vec<String>,
}

impl ModuleCollection {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, d: ModuleDescriptor) -> Result<(), ModuleError> {
        if self.modules.contains_key(&d.name) {
            return Err(ModuleError::DuplicateModule(d.name));
        }
        self.order.push(d.name.clone());
        self.modules.insert(d.name.clone(), d);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&ModuleDescriptor> {
        self.modules.get(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = &ModuleDescriptor> {
        self.order.iter().map(|n| &self.modules[n])
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scorer() -> ModuleDescriptor {
        define_module("scorer", &[("params", SlotType::Table)], &["ingest", "score"], "0.1.0").unwrap()
    }

    #[test]
    fn define_echoes_inputs() {
        let d = scorer();
        assert_eq!(d.supported_verbs, vec![Verb::Ingest, Verb::Score]);
        assert_eq!(d.lifecycle, Lifecycle::Experimental);
        assert_eq!(d.parent, None);
        assert_eq!(d.version, Version::new(0, 1, 0));
    }

    #[test]
    fn define_rejects_unknown_verb() {
        let err = define_module("x", &[], &["fly"], "0.1.0").unwrap_err().to_string();
        assert!(err.starts_with("unknown verb 'fly'; legal verbs: ingest, validate,"), "{err}");
    }

    #[test]
    fn define_rejects_duplicate_slot() {
        let err = define_module("m", &[("a", SlotType::Number), ("a", SlotType::Text)], &["ingest"], "1.0.0")
            .unwrap_err();
        assert_eq!(err.to_string(), "duplicate slot 'a'");
    }

    #[test]
    fn define_rejects_bad_version() {
        for v in ["1.0", "1.0.0.0", "a.b.c", "1.-1.0", ""] {
            assert!(matches!(define_module("m", &[], &[], v), Err(ModuleError::BadVersion(_))), "{v}");
        }
    }

    #[test]
    fn inherit_unions_slots_and_verbs() {
        let p = define_module("p", &[("a", SlotType::Number)], &["score"], "0.1.0").unwrap();
        let c = inherit_module(&p, "child", &[("b", SlotType::Text)], &["predict"]).unwrap();
        assert_eq!(c.slots.keys().collect::<Vec<_>>(), vec!["a", "b"]);
        assert_eq!(c.supported_verbs, vec![Verb::Score, Verb::Predict]);
        assert_eq!(c.parent.as_deref(), Some("p"));
    }

    #[test]
    fn inherit_from_deprecated_fails() {
        let p = renew(&scorer(), Bump::Patch, Some(Lifecycle::Deprecated)).unwrap();
        let p = ModuleDescriptor { name: "p".into(), ..p };
        let err = inherit_module(&p, "c", &[], &[]).unwrap_err();
        assert_eq!(err.to_string(), "parent 'p' is deprecated");
    }

    #[test]
    fn renew_semver() {
        let d = ModuleDescriptor { version: Version::new(1, 2, 3), ..scorer() };
        assert_eq!(renew(&d, Bump::Minor, None).unwrap().version.to_string(), "1.3.0");
        let dep = renew(&d, Bump::Major, Some(Lifecycle::Deprecated)).unwrap();
        assert_eq!(dep.version.to_string(), "2.0.0");
        assert_eq!(dep.lifecycle, Lifecycle::Deprecated);
        let err = renew(&dep, Bump::Patch, Some(Lifecycle::Stable)).unwrap_err();
        assert!(err.to_string().contains("cannot un-deprecate"));
        // staying deprecated is allowed
        assert!(renew(&dep, Bump::Patch, None).is_ok());
    }

    #[test]
    fn json_field_order_and_null_parent() {
        let json = scorer().to_json();
        let keys = ["\"name\"", "\"version\"", "\"parent\"", "\"slots\"", "\"supported_verbs\"", "\"lifecycle\"", "\"citation\""];
        let positions: Vec<usize> = keys.iter().map(|k| json.find(k).unwrap()).collect();
        assert!(positions.windows(2).all(|w| w[0] < w[1]));
        assert!(json.contains("\"parent\": null"));
        let back: ModuleDescriptor = serde_json::from_str(&json).unwrap();
        assert_eq!(back, scorer());
    }

    #[test]
    fn collection_names_unique() {
        let mut c = ModuleCollection::new();
        c.insert(scorer()).unwrap();
        assert!(matches!(c.insert(scorer()), Err(ModuleError::DuplicateModule(_))));
    }
}
