#![allow(dead_code)]

pub mod stub;

use std::path::PathBuf;
use std::sync::Arc;

use ksllm::datasets::{load_jsonl, LoadMode, QARecord};
use ksllm::embedding::LookupEmbedder;
use ksllm::llm::{MockScript, ScriptedMockClient};

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

pub fn desk_records() -> Vec<QARecord> {
    load_jsonl(&fixture("desk20.jsonl"), LoadMode::Strict).unwrap().records
}

pub fn record(id: &str) -> QARecord {
    desk_records().into_iter().find(|r| r.id == id).unwrap()
}

pub fn desk_mock() -> Arc<ScriptedMockClient> {
    Arc::new(ScriptedMockClient::new(MockScript::load(&fixture("mock_script.json")).unwrap()))
}

pub const CURTIS_QUERY: &str = "(Jamie Lee Curtis, occupation, actress), (Jamie Lee Curtis, birthdate, November 22, 1958), (Jamie Lee Curtis, notable work, Halloween)";
/// The query the pipeline renders from the comma-free triples the mock returns.
pub const CURTIS_PIPELINE_QUERY: &str = "(Jamie Lee Curtis, occupation, actress), (Jamie Lee Curtis, birthdate, November 22 1958), (Jamie Lee Curtis, notable work, Halloween)";
pub const CURTIS_BORN: &str = "She was born on November 22, 1958.";
pub const CURTIS_SCORPIO: &str = "Scorpio corresponds to the solar calendar time from October 23 to November 22.";

/// Lookup-table embedder whose geometry puts the birth-date and star-sign
/// sentences nearest to the triple query.
pub fn curtis_embedder() -> LookupEmbedder {
    LookupEmbedder::new([
        (CURTIS_QUERY, vec![1.0, 0.0, 0.0]),
        (CURTIS_PIPELINE_QUERY, vec![1.0, 0.0, 0.0]),
        ("What star sign is Jamie Lee Curtis?", vec![0.0, 1.0, 0.0]),
        ("Jamie Lee Curtis is an American actress and author.", vec![0.0, 1.0, 0.0]),
        (CURTIS_BORN, vec![0.9, 0.1, 0.0]),
        ("Her parents were the actors Tony Curtis and Janet Leigh.", vec![0.0, 0.0, 1.0]),
        ("She made her film debut in the 1978 horror film Halloween.", vec![0.2, 0.6, 0.6]),
        (CURTIS_SCORPIO, vec![0.8, 0.3, 0.0]),
    ])
    .unwrap()
}

/// Distances by plain loop, for brute-force checks.
pub fn naive_distance(a: &[f64], b: &[f64]) -> f64 {
    let mut sum = 0.0;
    for i in 0..a.len() {
        let d = a[i] - b[i];
        sum += d * d;
    }
    sum.sqrt()
}

/// Sort every index by distance (stable, so equal distances keep document
/// order) and keep the first `k`.
pub fn brute_force_top_k(distances: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..distances.len()).collect();
    idx.sort_by(|&a, &b| distances[a].partial_cmp(&distances[b]).unwrap());
    idx.truncate(k);
    idx
}
