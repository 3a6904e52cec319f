use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::RegistryError;
use crate::modules::Version;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArtifactKind {
    Module,
    Dataset,
    Program,
    Catalogue,
}

impl ArtifactKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ArtifactKind::Module => "module",
            ArtifactKind::Dataset => "dataset",
            ArtifactKind::Program => "program",
            ArtifactKind::Catalogue => "catalogue",
        }
    }
}

impl fmt::Display for ArtifactKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ArtifactKind {
    type Err = RegistryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "module" => Ok(ArtifactKind::Module),
            "dataset" => Ok(ArtifactKind::Dataset),
            "program" => Ok(ArtifactKind::Program),
            "catalogue" => Ok(ArtifactKind::Catalogue),
            _ => Err(RegistryError::Invalid(format!("unknown kind '{s}'; expected module, dataset, program or catalogue"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegistryEntry {
    pub identifier: String,
    pub kind: ArtifactKind,
    pub version: Version,
    pub keywords: Vec<String>,
    pub description: String,
    pub content_hash: String,
    /// Path relative to the registry root.
    pub location: String,
    pub deprecated: bool,
    pub citation: String,
    /// Only meaningful for datasets.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidential: Option<bool>,
}

impl RegistryEntry {
    fn matches(&self, needle: &str) -> bool {
        self.identifier.to_lowercase().contains(needle)
            || self.description.to_lowercase().contains(needle)
            || self.keywords.iter().any(|k| k.to_lowercase().contains(needle))
    }
}

/// Caller-supplied description of an artifact being published.
#[derive(Debug, Clone, PartialEq)]
pub struct PublishMeta {
    pub identifier: String,
    pub kind: ArtifactKind,
    pub version: Version,
    pub keywords: Vec<String>,
    pub description: String,
    pub citation: String,
    pub confidential: Option<bool>,
}

impl PublishMeta {
    pub fn new(identifier: &str, kind: ArtifactKind, version: Version) -> Self {
        Self {
            identifier: identifier.into(),
            kind,
            version,
            keywords: vec![],
            description: String::new(),
            citation: String::new(),
            confidential: None,
        }
    }

    pub fn keywords(mut self, keywords: &[&str]) -> Self {
        self.keywords = keywords.iter().map(|k| k.to_string()).collect();
        self
    }

    pub fn description(mut self, description: &str) -> Self {
        self.description = description.into();
        self
    }

    pub fn confidential(mut self, flag: bool) -> Self {
        self.confidential = Some(flag);
        self
    }

    pub(crate) fn check(&self) -> Result<(), RegistryError> {
        let id = &self.identifier;
        if id.is_empty() || !id.chars().all(|c| c.is_ascii_alphanumeric() || "-_./:".contains(c)) {
            return Err(RegistryError::Invalid(format!("identifier '{id}' must be a non-empty slug")));
        }
        if self.kind == ArtifactKind::Dataset {
            match self.confidential {
                Some(true) => return Err(RegistryError::Confidential),
                None => return Err(RegistryError::ConfidentialityUndeclared),
                Some(false) => {}
            }
        }
        Ok(())
    }
}

/// Append-only list of entries; `index_version` grows with every change.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RegistryIndex {
    pub index_version: u64,
    pub entries: Vec<RegistryEntry>,
}

impl RegistryIndex {
    pub fn from_json(text: &str) -> Result<Self, RegistryError> {
        let idx: RegistryIndex = serde_json::from_str(text).map_err(|e| RegistryError::Format(e.to_string()))?;
        for (i, a) in idx.entries.iter().enumerate() {
            if idx.entries[..i].iter().any(|b| b.identifier == a.identifier && b.version == a.version) {
                return Err(RegistryError::Format(format!("duplicate entry {} {}", a.identifier, a.version)));
            }
        }
        Ok(idx)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("index serializes") + "\n"
    }

    pub fn get(&self, identifier: &str, version: Version) -> Option<&RegistryEntry> {
        self.entries.iter().find(|e| e.identifier == identifier && e.version == version)
    }

    /// Case-insensitive substring search, ordered by identifier then
    /// descending version.
    pub fn search(&self, query: &str, kind: Option<ArtifactKind>, include_deprecated: bool) -> Vec<RegistryEntry> {
        let needle = query.to_lowercase();
        let mut hits: Vec<RegistryEntry> = self
            .entries
            .iter()
            .filter(|e| include_deprecated || !e.deprecated)
            .filter(|e| kind.is_none_or(|k| e.kind == k))
            .filter(|e| e.matches(&needle))
            .cloned()
            .collect();
        hits.sort_by(|a, b| a.identifier.cmp(&b.identifier).then(b.version.cmp(&a.version)));
        hits
    }

    /// Exact version, or `"latest"` for the highest non-deprecated one.
    pub fn resolve(&self, identifier: &str, version: &str) -> Result<&RegistryEntry, RegistryError> {
        let not_found = || RegistryError::NotFound { identifier: identifier.into(), version: version.into() };
        if version == "latest" {
            return self
                .entries
                .iter()
                .filter(|e| e.identifier == identifier && !e.deprecated)
                .max_by_key(|e| e.version)
                .ok_or_else(not_found);
        }
        let v: Version = version.parse().map_err(|_| RegistryError::Invalid(format!("bad version '{version}'")))?;
        self.get(identifier, v).ok_or_else(not_found)
    }
}
