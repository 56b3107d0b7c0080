//! Engine for a multi-agent sepsis care team: case model, early warning
//! scoring, agent registry, completion gateway, retrieval, the consultation
//! pipeline and survey statistics.

pub mod domain;
pub mod fixtures;
pub mod gateway;
pub mod news;
pub mod orchestrator;
pub mod rag;
pub mod registry;
pub mod stats;

pub use domain::{AgentResponse, AgentRole, PatientCase, Transcript};
pub use orchestrator::{Orchestrator, OrchestratorConfig, TeamSelector};

/// Signed-rank test result in double precision.
pub type WilcoxonResult = stats::TestResult<f64>;
/// Single-precision embedding vector, as stored in collections.
pub type Embedding = Vec<f32>;
