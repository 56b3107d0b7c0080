use std::time::{Duration, Instant};

use async_trait::async_trait;
use serde::Deserialize;

use super::{Completion, CompletionBackend, CompletionRequest, GatewayError, API_KEY_ENV};

/// Client for the de-facto chat-completions wire format
/// (`POST {base_url}/chat/completions`).
#[derive(Debug, Clone)]
pub struct ChatCompletionsBackend {
    client: reqwest::Client,
    base_url: String,
    model: String,
    api_key: Option<String>,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: Message,
}

#[derive(Deserialize)]
struct Message {
    content: Option<String>,
}

impl ChatCompletionsBackend {
    pub fn new(base_url: &str, model: &str, api_key: Option<String>) -> Self {
        ChatCompletionsBackend {
            client: reqwest::Client::new(),
            base_url: base_url.trim_end_matches('/').to_string(),
            model: model.to_string(),
            api_key,
        }
    }

    /// Reads the API key from `MATEC_LLM_API_KEY`, if set.
    pub fn from_env(base_url: &str, model: &str) -> Self {
        Self::new(base_url, model, std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty()))
    }

    async fn round_trip(&self, req: &CompletionRequest) -> Result<String, GatewayError> {
        let body = serde_json::json!({
            "model": self.model,
            "messages": [
                { "role": "system", "content": req.system_prompt },
                { "role": "user", "content": req.user_prompt },
            ],
            "temperature": req.temperature,
            "max_tokens": req.max_tokens,
        });
        let mut http = self
            .client
            .post(format!("{}/chat/completions", self.base_url))
            .header("x-request-id", &req.request_id)
            .json(&body);
        if let Some(key) = &self.api_key {
            http = http.bearer_auth(key);
        }
        let resp =
            http.send().await.map_err(|e| GatewayError::BackendError { status: None, message: e.to_string() })?;
        let status = resp.status();
        if !status.is_success() {
            let message = resp.text().await.unwrap_or_default();
            return Err(GatewayError::BackendError { status: Some(status.as_u16()), message });
        }
        let parsed: ChatResponse = resp.json().await.map_err(|e| GatewayError::MalformedResponse(e.to_string()))?;
        parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| GatewayError::MalformedResponse("no message content".into()))
    }
}

#[async_trait]
impl CompletionBackend for ChatCompletionsBackend {
    async fn complete(&self, req: &CompletionRequest) -> Result<Completion, GatewayError> {
        let started = Instant::now();
        let text = tokio::time::timeout(Duration::from_millis(req.timeout_ms), self.round_trip(req))
            .await
            .map_err(|_| GatewayError::Timeout(req.timeout_ms))??;
        Ok(Completion { text, latency_ms: started.elapsed().as_millis() as u64 })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{AgentRole, ConsultMode};
    use crate::gateway::AgentTask;
    use axum::http::{HeaderMap, StatusCode};
    use axum::routing::post;
    use axum::{Json, Router};
    use serde_json::Value;

    async fn serve(app: Router) -> String {
        let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
        let addr = listener.local_addr().unwrap();
        tokio::spawn(async move { axum::serve(listener, app).await.unwrap() });
        format!("http://{addr}/v1")
    }

    fn request(timeout_ms: u64) -> CompletionRequest {
        CompletionRequest {
            system_prompt: "You are the nurse.".into(),
            user_prompt: "How is the patient?".into(),
            role: AgentRole::Nurse,
            max_tokens: 64,
            temperature: 0.2,
            timeout_ms,
            request_id: "req-7".into(),
            mode: ConsultMode::TeamAssessment,
            task: AgentTask::Respond,
        }
    }

    #[tokio::test]
    async fn speaks_chat_completions() {
        let app = Router::new().route(
            "/v1/chat/completions",
            post(|headers: HeaderMap, Json(body): Json<Value>| async move {
                assert_eq!(headers["authorization"], "Bearer sk-test");
                assert_eq!(body["messages"][0]["role"], "system");
                assert_eq!(body["messages"][1]["content"], "How is the patient?");
                assert_eq!(body["max_tokens"], 64);
                Json(serde_json::json!({
                    "choices": [{ "message": { "role": "assistant", "content": "ASSESSMENT: stable" } }]
                }))
            }),
        );
        let backend = ChatCompletionsBackend::new(&serve(app).await, "m", Some("sk-test".into()));
        let out = backend.complete(&request(5_000)).await.unwrap();
        assert_eq!(out.text, "ASSESSMENT: stable");
    }

    #[tokio::test]
    async fn maps_http_errors_and_bad_bodies() {
        let app =
            Router::new().route("/v1/chat/completions", post(|| async { (StatusCode::SERVICE_UNAVAILABLE, "busy") }));
        let backend = ChatCompletionsBackend::new(&serve(app).await, "m", None);
        let err = backend.complete(&request(5_000)).await.unwrap_err();
        assert_eq!(err, GatewayError::BackendError { status: Some(503), message: "busy".into() });
        assert!(err.is_transient());

        let app =
            Router::new().route("/v1/chat/completions", post(|| async { Json(serde_json::json!({"choices": []})) }));
        let backend = ChatCompletionsBackend::new(&serve(app).await, "m", None);
        assert!(matches!(backend.complete(&request(5_000)).await, Err(GatewayError::MalformedResponse(_))));
    }

    #[tokio::test]
    async fn never_waits_past_the_timeout() {
        let app = Router::new().route(
            "/v1/chat/completions",
            post(|| async {
                tokio::time::sleep(Duration::from_secs(10)).await;
                "late"
            }),
        );
        let backend = ChatCompletionsBackend::new(&serve(app).await, "m", None);
        let started = Instant::now();
        assert_eq!(backend.complete(&request(200)).await, Err(GatewayError::Timeout(200)));
        assert!(started.elapsed() < Duration::from_millis(1_000));
    }
}
