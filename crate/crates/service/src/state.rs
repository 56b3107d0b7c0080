use std::sync::Arc;

use matec_core::fixtures;
use matec_core::gateway::{ChatCompletionsBackend, FaultInjection, MockBackend, MockScript, SharedBackend};
use matec_core::orchestrator::{Clock, IdSource, OrchestratorConfig, SystemClock};
use matec_core::rag::{HashEmbedder, VectorStore, DEFAULT_CHUNK_SIZE, DEFAULT_OVERLAP};
use matec_core::registry::Registry;
use matec_core::Orchestrator;

use crate::config::{BackendConfig, ServiceConfig};
use crate::store::{OpenReport, Store};

/// Random, collision-free ids for a running service.
#[derive(Debug, Default, Clone, Copy)]
pub struct UuidIds;

impl IdSource for UuidIds {
    fn next_id(&self, prefix: &str) -> String {
        format!("{prefix}-{}", uuid::Uuid::new_v4().simple())
    }
}

#[derive(Clone)]
pub struct AppState {
    pub store: Arc<Store>,
    pub orchestrator: Arc<Orchestrator>,
    pub references: Arc<VectorStore>,
    pub ids: Arc<dyn IdSource>,
    pub clock: Arc<dyn Clock>,
    pub digest_recipients: Vec<String>,
}

pub fn backend(config: &BackendConfig) -> anyhow::Result<SharedBackend> {
    Ok(match config {
        BackendConfig::Mock { seed, fault, simulate_latency } => {
            let mut script = MockScript::default();
            if let Some(f) = fault {
                script = script.with_fault(f.parse::<FaultInjection>()?);
            }
            Arc::new(MockBackend::new(script, *seed).with_simulated_latency(*simulate_latency))
        }
        BackendConfig::Live { endpoint, model } => Arc::new(ChatCompletionsBackend::from_env(endpoint, model)),
    })
}

/// Loads the bundled reference corpus into an empty store.
pub async fn seed_references(store: &VectorStore) -> anyhow::Result<()> {
    if store.is_empty() {
        for (id, title, body) in fixtures::corpus() {
            store.ingest(id, title, body, DEFAULT_CHUNK_SIZE, DEFAULT_OVERLAP).await?;
        }
    }
    Ok(())
}

impl AppState {
    /// Opens the record log and reference collection under `store_dir` and
    /// wires the orchestrator to the configured backend.
    pub async fn open(config: &ServiceConfig) -> anyhow::Result<(AppState, OpenReport)> {
        let registry = match &config.roster {
            Some(path) => Registry::from_path(path)?,
            None => Registry::default_config(),
        };
        let (store, report) = Store::open(&config.log_path())?;
        let references = Arc::new(VectorStore::open(&config.reference_path(), Arc::new(HashEmbedder::default()))?);
        seed_references(&references).await?;
        let ids: Arc<dyn IdSource> = Arc::new(UuidIds);
        let clock: Arc<dyn Clock> = Arc::new(SystemClock);
        let orchestrator = Orchestrator::new(Arc::new(registry), backend(&config.backend)?)
            .with_store(references.clone())
            .with_config(OrchestratorConfig {
                parallelism: config.parallelism,
                agent_timeout_ms: config.agent_timeout_ms,
                synthesis_sees_all_roles: config.synthesis_sees_all_roles,
                ..OrchestratorConfig::default()
            })
            .with_clock(clock.clone())
            .with_ids(ids.clone());
        let state = AppState {
            store: Arc::new(store),
            orchestrator: Arc::new(orchestrator),
            references,
            ids,
            clock,
            digest_recipients: config.digest_recipients.clone(),
        };
        Ok((state, report))
    }
}
