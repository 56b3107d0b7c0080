//! Uniform error bodies.

use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use matec_core::orchestrator::OrchestratorError;
use matec_core::registry::RegistryError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct Problem {
    /// Stable machine-readable code, e.g. `CaseNotFound`.
    pub code: String,
    pub message: String,
    #[serde(default)]
    pub detail: Value,
}

impl Problem {
    pub fn new(code: &str, message: impl Into<String>) -> Self {
        Problem { code: code.to_string(), message: message.into(), detail: Value::Null }
    }

    pub fn with_detail(mut self, detail: impl Serialize) -> Self {
        self.detail = serde_json::to_value(detail).unwrap_or(Value::Null);
        self
    }
}

#[derive(Debug, Clone)]
pub struct ApiError {
    pub status: StatusCode,
    pub problem: Problem,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        ApiError { status, problem: Problem::new(code, message) }
    }

    pub fn detail(mut self, detail: impl Serialize) -> Self {
        self.problem = self.problem.with_detail(detail);
        self
    }

    pub fn not_found(code: &str, what: impl std::fmt::Display) -> Self {
        ApiError::new(StatusCode::NOT_FOUND, code, format!("{what} not found"))
    }

    pub fn unprocessable(code: &str, message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, code, message)
    }

    pub fn internal(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "Internal", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = serde_json::to_vec(&self.problem).unwrap_or_default();
        (self.status, [(header::CONTENT_TYPE, "application/problem+json")], body).into_response()
    }
}

impl From<axum::extract::rejection::JsonRejection> for ApiError {
    fn from(r: axum::extract::rejection::JsonRejection) -> Self {
        ApiError::new(r.status(), "MalformedBody", r.body_text())
    }
}

impl From<axum::extract::rejection::QueryRejection> for ApiError {
    fn from(r: axum::extract::rejection::QueryRejection) -> Self {
        ApiError::new(r.status(), "MalformedQuery", r.body_text())
    }
}

impl From<axum::extract::rejection::PathRejection> for ApiError {
    fn from(r: axum::extract::rejection::PathRejection) -> Self {
        ApiError::new(r.status(), "MalformedPath", r.body_text())
    }
}

impl From<OrchestratorError> for ApiError {
    fn from(e: OrchestratorError) -> Self {
        let msg = e.to_string();
        match e {
            OrchestratorError::InvalidCase(report) => ApiError::unprocessable("ValidationFailed", msg).detail(report),
            OrchestratorError::NoAgentsAvailable => ApiError::unprocessable("NoAgentsAvailable", msg),
            OrchestratorError::UnknownRole(_) => ApiError::unprocessable("UnknownRole", msg),
            OrchestratorError::UnsupportedMode(_) => ApiError::unprocessable("UnsupportedMode", msg),
            OrchestratorError::UnknownSpecialty(_) => ApiError::unprocessable("UnknownSpecialty", msg),
            OrchestratorError::MissingSynthesis | OrchestratorError::NothingToSynthesize => {
                ApiError::new(StatusCode::CONFLICT, "MissingSynthesis", msg)
            }
            OrchestratorError::SynthesisBackendFailure(_) | OrchestratorError::AgentFailed { .. } => {
                ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "BackendUnavailable", msg)
            }
            OrchestratorError::Registry(RegistryError::UnknownTemplate(_)) => {
                ApiError::unprocessable("UnknownTemplate", msg)
            }
            OrchestratorError::Retrieval(_) => {
                ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "RetrievalUnavailable", msg)
            }
            OrchestratorError::Summary(_) | OrchestratorError::Registry(_) => ApiError::internal(msg),
        }
    }
}
