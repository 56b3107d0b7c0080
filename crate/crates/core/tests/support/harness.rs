#![allow(dead_code)]

use std::sync::Arc;

use matec_core::domain::PatientCase;
use matec_core::fixtures;
use matec_core::gateway::{MockBackend, MockScript};
use matec_core::orchestrator::{FixedClock, OrchestratorConfig, SeededIds};
use matec_core::rag::{HashEmbedder, VectorStore, DEFAULT_CHUNK_SIZE, DEFAULT_OVERLAP};
use matec_core::registry::Registry;
use matec_core::Orchestrator;

pub async fn reference_store() -> Arc<VectorStore> {
    let store = VectorStore::in_memory(Arc::new(HashEmbedder::default()));
    for (id, title, body) in fixtures::corpus() {
        store.ingest(id, title, body, DEFAULT_CHUNK_SIZE, DEFAULT_OVERLAP).await.unwrap();
    }
    Arc::new(store)
}

/// A fully deterministic orchestrator over the mock backend: clock pinned
/// to the case's newest observation, ids derived from `seed`.
pub async fn orchestrator(
    case: &PatientCase,
    script: MockScript,
    seed: u64,
    config: OrchestratorConfig,
) -> Orchestrator {
    let backend = Arc::new(MockBackend::new(script, seed));
    Orchestrator::new(Arc::new(Registry::default_config()), backend)
        .with_store(reference_store().await)
        .with_config(config)
        .with_clock(Arc::new(FixedClock(case.latest_timestamp().unwrap())))
        .with_ids(Arc::new(SeededIds::new(seed)))
}
