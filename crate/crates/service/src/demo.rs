//! One reproducible mock consultation, as run by `matec demo`.

use std::path::Path;
use std::sync::Arc;

use anyhow::Context;
use matec_core::domain::{CaseDocument, ConsultMode, PatientCase};
use matec_core::fixtures;
use matec_core::gateway::{FaultInjection, MockBackend, MockScript};
use matec_core::orchestrator::{FixedClock, OrchestratorConfig, SeededIds};
use matec_core::rag::{HashEmbedder, VectorStore};
use matec_core::registry::Registry;
use matec_core::{Orchestrator, TeamSelector, Transcript};

use crate::state::seed_references;

#[derive(Debug, Clone)]
pub struct DemoOptions {
    pub seed: u64,
    pub fault: Option<FaultInjection>,
    pub timeout_ms: u64,
    pub mode: ConsultMode,
    pub question: String,
}

impl Default for DemoOptions {
    fn default() -> Self {
        DemoOptions {
            seed: 0,
            fault: None,
            timeout_ms: OrchestratorConfig::default().agent_timeout_ms,
            mode: ConsultMode::TeamAssessment,
            question: String::new(),
        }
    }
}

/// A bundled fixture by name, or a case document on disk.
pub fn load_case(name_or_path: &str) -> anyhow::Result<PatientCase> {
    if let Some(case) = fixtures::by_name(name_or_path) {
        return Ok(case);
    }
    let path = Path::new(name_or_path);
    let text = std::fs::read_to_string(path).with_context(|| {
        format!("{name_or_path:?} is neither a bundled case ({}) nor a readable file", fixtures::NAMES.join(", "))
    })?;
    Ok(CaseDocument::from_json(&text)?)
}

/// Runs one team consultation against the mock backend. The clock is
/// pinned to the case's newest observation and ids derive from the seed,
/// so equal inputs give byte-identical transcripts.
pub async fn run_demo(case: &PatientCase, options: &DemoOptions) -> anyhow::Result<Transcript> {
    let mut script = MockScript::default();
    if let Some(f) = &options.fault {
        script = script.with_fault(f.clone());
    }
    let references = VectorStore::in_memory(Arc::new(HashEmbedder::default()));
    seed_references(&references).await?;
    let now = case.latest_timestamp().context("case has no timestamped observations")?;
    let orchestrator =
        Orchestrator::new(Arc::new(Registry::default_config()), Arc::new(MockBackend::new(script, options.seed)))
            .with_store(Arc::new(references))
            .with_config(OrchestratorConfig { agent_timeout_ms: options.timeout_ms, ..OrchestratorConfig::default() })
            .with_clock(Arc::new(FixedClock(now)))
            .with_ids(Arc::new(SeededIds::new(options.seed)));
    Ok(orchestrator.run_consultation(case, &options.question, options.mode, &TeamSelector::Core).await?)
}
