use super::{define_module, ModuleCollection, ModuleDescriptor, SlotType, Verb};

/// Command-line subcommands and the verb each one is labelled with.
pub const CLI_SUBCOMMANDS: [(&str, Verb); 12] = [
    ("validate", Verb::Validate),
    ("describe", Verb::Describe),
    ("synth", Verb::Transform),
    ("score", Verb::Score),
    ("fit", Verb::Evaluate),
    ("predict", Verb::Predict),
    ("qalys", Verb::Transform),
    ("report", Verb::Report),
    ("run", Verb::Export),
    ("search", Verb::Search),
    ("publish", Verb::Share),
    ("fetch", Verb::Ingest),
];

fn stable(name: &str, slots: &[(&str, SlotType)], verbs: &[&str]) -> ModuleDescriptor {
    let mut d = define_module(name, slots, verbs, crate::TOOLKIT_VERSION).expect("toolkit descriptor is well formed");
    d.lifecycle = super::Lifecycle::Stable;
    d
}

/// Descriptors for the modules that ship with the toolkit. Replication
/// manifests name these modules and are checked against their verbs.
pub fn toolkit_modules() -> ModuleCollection {
    let mut c = ModuleCollection::new();
    let all = [
        stable(
            "data",
            &[("dictionary", SlotType::Table), ("metadata", SlotType::Any), ("records", SlotType::Table)],
            &["ingest", "validate", "describe", "depict", "transform"],
        ),
        stable(
            "scoring",
            &[("instrument", SlotType::Any), ("scores", SlotType::Table)],
            &["ingest", "score", "depict"],
        ),
        stable(
            "mapping",
            &[("spec", SlotType::Any), ("models", SlotType::Table), ("performance", SlotType::Table)],
            &["specify", "depict", "evaluate", "select", "export"],
        ),
        stable(
            "predict",
            &[("model", SlotType::Any), ("predictions", SlotType::Table)],
            &["search", "ingest", "predict", "transform"],
        ),
        stable("report", &[("template", SlotType::Text), ("manifest", SlotType::Any)], &["report", "export"]),
        stable("registry", &[("index", SlotType::Any)], &["share", "search", "ingest", "renew"]),
    ];
    for d in all {
        c.insert(d).expect("toolkit module names are unique");
    }
    c
}
