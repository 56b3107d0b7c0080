//! Provider-agnostic completion interface, its mock and live backends, and
//! the structured-response parser.

mod live;
mod mock;
mod parse;

use std::sync::Arc;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};

use crate::domain::{AgentRole, ConsultMode};

pub use live::ChatCompletionsBackend;
pub use mock::{CaseFacts, Fault, FaultInjection, LabFact, MedFact, MockBackend, MockKey, MockScript, ParseFaultError};
pub use parse::{
    parse_claim_line, parse_differential_line, parse_structured, render_claim, render_structured, split_sections,
    strip_list_marker, RESPONSE_HEADINGS,
};

pub const API_KEY_ENV: &str = "MATEC_LLM_API_KEY";

/// What the caller wants from the agent in this call.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AgentTask {
    /// Answer the consult question from the agent's own perspective.
    Respond,
    /// Merge the team's answers (senior physician only).
    Synthesize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub system_prompt: String,
    pub user_prompt: String,
    pub role: AgentRole,
    pub max_tokens: u32,
    pub temperature: f32,
    pub timeout_ms: u64,
    pub request_id: String,
    pub mode: ConsultMode,
    pub task: AgentTask,
}

impl CompletionRequest {
    pub fn validate(&self) -> Result<(), GatewayError> {
        let bad = |m: &str| Err(GatewayError::InvalidRequest(m.to_string()));
        if self.timeout_ms == 0 {
            return bad("timeout_ms must be positive");
        }
        if self.system_prompt.trim().is_empty() || self.user_prompt.trim().is_empty() {
            return bad("prompts must be nonempty");
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return bad("temperature must be within [0, 2]");
        }
        if self.max_tokens == 0 {
            return bad("max_tokens must be positive");
        }
        Ok(())
    }
}

/// Sampling temperature used when the caller does not override it.
pub fn default_temperature(role: &AgentRole) -> f32 {
    match role {
        AgentRole::SeniorPhysician | AgentRole::RiskPrediction => 0.0,
        _ => 0.2,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Completion {
    pub text: String,
    pub latency_ms: u64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GatewayError {
    #[error("no answer within {0} ms")]
    Timeout(u64),
    /// `status` is `None` when the request never got an HTTP response.
    #[error("backend error{}: {message}", status.map(|s| format!(" (HTTP {s})")).unwrap_or_default())]
    BackendError { status: Option<u16>, message: String },
    #[error("malformed backend response: {0}")]
    MalformedResponse(String),
    #[error("invalid completion request: {0}")]
    InvalidRequest(String),
}

impl GatewayError {
    /// Transport failures and server-side errors are worth one more try.
    pub fn is_transient(&self) -> bool {
        match self {
            GatewayError::BackendError { status: None, .. } => true,
            GatewayError::BackendError { status: Some(s), .. } => *s >= 500 || *s == 429,
            _ => false,
        }
    }
}

#[async_trait]
pub trait CompletionBackend: Send + Sync {
    async fn complete(&self, req: &CompletionRequest) -> Result<Completion, GatewayError>;
}

/// Validates, calls the backend, and retries once on a transient error.
/// Timeouts are never retried.
pub async fn complete_with_retry(
    backend: &dyn CompletionBackend,
    req: &CompletionRequest,
) -> Result<Completion, GatewayError> {
    req.validate()?;
    match backend.complete(req).await {
        Err(e) if e.is_transient() => {
            tracing::warn!(role = %req.role, error = %e, "retrying completion");
            backend.complete(req).await
        }
        other => other,
    }
}

pub type SharedBackend = Arc<dyn CompletionBackend>;

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};

    struct Flaky {
        calls: AtomicUsize,
        first: GatewayError,
    }

    #[async_trait]
    impl CompletionBackend for Flaky {
        async fn complete(&self, _: &CompletionRequest) -> Result<Completion, GatewayError> {
            if self.calls.fetch_add(1, Ordering::SeqCst) == 0 {
                Err(self.first.clone())
            } else {
                Ok(Completion { text: "ASSESSMENT: ok".into(), latency_ms: 1 })
            }
        }
    }

    fn request() -> CompletionRequest {
        CompletionRequest {
            system_prompt: "sys".into(),
            user_prompt: "user".into(),
            role: AgentRole::Nurse,
            max_tokens: 100,
            temperature: 0.2,
            timeout_ms: 1000,
            request_id: "r1".into(),
            mode: ConsultMode::TeamAssessment,
            task: AgentTask::Respond,
        }
    }

    #[tokio::test]
    async fn retries_transport_errors_once() {
        let b = Flaky {
            calls: AtomicUsize::new(0),
            first: GatewayError::BackendError { status: None, message: "reset".into() },
        };
        assert!(complete_with_retry(&b, &request()).await.is_ok());
        assert_eq!(b.calls.load(Ordering::SeqCst), 2);
    }

    #[tokio::test]
    async fn never_retries_timeouts_or_client_errors() {
        for first in
            [GatewayError::Timeout(1000), GatewayError::BackendError { status: Some(400), message: "bad".into() }]
        {
            let b = Flaky { calls: AtomicUsize::new(0), first: first.clone() };
            assert_eq!(complete_with_retry(&b, &request()).await, Err(first));
            assert_eq!(b.calls.load(Ordering::SeqCst), 1);
        }
    }

    #[tokio::test]
    async fn rejects_invalid_requests() {
        let b = Flaky { calls: AtomicUsize::new(1), first: GatewayError::Timeout(0) };
        for edit in [
            (|r: &mut CompletionRequest| r.timeout_ms = 0) as fn(&mut CompletionRequest),
            |r| r.user_prompt = " ".into(),
            |r| r.temperature = 2.5,
        ] {
            let mut r = request();
            edit(&mut r);
            assert!(matches!(complete_with_retry(&b, &r).await, Err(GatewayError::InvalidRequest(_))));
        }
    }

    #[test]
    fn temperatures() {
        assert_eq!(default_temperature(&AgentRole::SeniorPhysician), 0.0);
        assert_eq!(default_temperature(&AgentRole::RiskPrediction), 0.0);
        assert_eq!(default_temperature(&AgentRole::Hospitalist), 0.2);
    }
}
