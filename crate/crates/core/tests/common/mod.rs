#![allow(dead_code)]

use std::path::PathBuf;

use coq_core::dataset::read_records;
use coq_core::{BenchmarkRecord, SensorRegistry};

pub fn fixture_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

pub fn benchmark() -> Vec<BenchmarkRecord> {
    let ingested = read_records(&fixture_dir().join("benchmark.jsonl")).expect("fixture benchmark");
    assert!(ingested.warnings.is_empty(), "{:?}", ingested.warnings);
    ingested.records
}

pub fn registry() -> SensorRegistry {
    SensorRegistry::with_fixtures(fixture_dir()).expect("fixture registry")
}

pub fn record(id: &str) -> BenchmarkRecord {
    benchmark()
        .into_iter()
        .find(|r| r.id == id)
        .unwrap_or_else(|| panic!("no fixture record {id}"))
}
