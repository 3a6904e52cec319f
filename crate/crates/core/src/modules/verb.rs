use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ModuleError;

/// The fixed command vocabulary. Every public operation of the toolkit is
/// labelled with exactly one of these verbs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verb {
    Ingest,
    Validate,
    Describe,
    Depict,
    Transform,
    Score,
    Specify,
    Evaluate,
    Select,
    Predict,
    Report,
    Export,
    Share,
    Renew,
    Search,
}

impl Verb {
    pub const ALL: [Verb; 15] = [
        Verb::Ingest,
        Verb::Validate,
        Verb::Describe,
        Verb::Depict,
        Verb::Transform,
        Verb::Score,
        Verb::Specify,
        Verb::Evaluate,
        Verb::Select,
        Verb::Predict,
        Verb::Report,
        Verb::Export,
        Verb::Share,
        Verb::Renew,
        Verb::Search,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Verb::Ingest => "ingest",
            Verb::Validate => "validate",
            Verb::Describe => "describe",
            Verb::Depict => "depict",
            Verb::Transform => "transform",
            Verb::Score => "score",
            Verb::Specify => "specify",
            Verb::Evaluate => "evaluate",
            Verb::Select => "select",
            Verb::Predict => "predict",
            Verb::Report => "report",
            Verb::Export => "export",
            Verb::Share => "share",
            Verb::Renew => "renew",
            Verb::Search => "search",
        }
    }

    /// Comma-separated list of all legal verb names, in vocabulary order.
    pub fn legal_list() -> String {
        join(Verb::ALL.iter().copied())
    }
}

pub(crate) fn join(verbs: impl IntoIterator<Item = Verb>) -> String {
    verbs.into_iter().map(Verb::as_str).collect::<Vec<_>>().join(", ")
}

impl fmt::Display for Verb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Verb {
    type Err = ModuleError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Verb::ALL
            .iter()
            .copied()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| ModuleError::UnknownVerb { verb: s.to_string(), legal: Verb::legal_list() })
    }
}
