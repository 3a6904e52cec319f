//! Shared inputs for the benchmarks.

use std::path::{Path, PathBuf};

use chemkit_core::{
    attach_instrument, ingest_table, load_dictionary, score_dataset, synthesize_dataset, validate_dataset, DatasetMetadata,
    InstrumentDefinition, RawTable, ValidatedDataset,
};

pub fn toy(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../toy").join(name)
}

fn read(name: &str) -> String {
    std::fs::read_to_string(toy(name)).expect("toy file")
}

pub fn metadata() -> DatasetMetadata {
    DatasetMetadata::new("uid").with_round("round").with_group("group")
}

pub fn raw_records() -> RawTable {
    ingest_table(&read("records.csv"), "NA").expect("toy records")
}

pub fn instrument() -> InstrumentDefinition {
    InstrumentDefinition::from_json(&read("instrument.json")).expect("toy instrument")
}

pub fn validated() -> ValidatedDataset {
    let dict = load_dictionary(&read("dictionary.csv")).expect("toy dictionary");
    validate_dataset(&raw_records(), &dict, &metadata()).expect("toy data is valid")
}

/// Toy data scored with the additive instrument, optionally grown by
/// synthesis to `n` rows.
pub fn scored(n: Option<usize>) -> ValidatedDataset {
    let mut ds = validated();
    if let Some(n) = n {
        ds = synthesize_dataset(&ds, n, 1).expect("synthesis");
    }
    let binding = attach_instrument(&ds, &instrument()).expect("binding");
    score_dataset(&binding, true).expect("scoring").to_dataset().expect("scored dataset")
}
