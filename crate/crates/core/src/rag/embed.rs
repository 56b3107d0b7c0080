use std::hash::Hasher;
use std::time::Duration;

use async_trait::async_trait;
use fnv::FnvHasher;
use serde::Deserialize;

use super::vector::normalize;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EmbedError {
    #[error("cannot embed empty text")]
    EmptyText,
    #[error("embedding backend error: {0}")]
    Backend(String),
    #[error("embedding has dimension {found}, expected {expected}")]
    Dimension { expected: usize, found: usize },
}

/// Maps text to a unit-length vector.
#[async_trait]
pub trait Embedder: Send + Sync {
    /// Stable identifier recorded in persisted collections.
    fn id(&self) -> String;
    fn dimension(&self) -> usize;
    async fn embed(&self, text: &str) -> Result<Vec<f32>, EmbedError>;
}

/// Deterministic bag-of-words embedding: each lowercase alphanumeric token
/// adds 1 to bucket `fnv1a64(token) mod dimension`, then the vector is
/// L2-normalized. Identical across processes and platforms.
#[derive(Debug, Clone, Copy)]
pub struct HashEmbedder {
    dimension: usize,
}

impl HashEmbedder {
    pub const DEFAULT_DIMENSION: usize = 256;

    pub fn new(dimension: usize) -> Self {
        assert!(dimension > 0);
        HashEmbedder { dimension }
    }

    pub fn embed_sync(&self, text: &str) -> Result<Vec<f32>, EmbedError> {
        let mut v = vec![0.0f32; self.dimension];
        for token in tokens(text) {
            let mut h = FnvHasher::default();
            h.write(token.as_bytes());
            v[(h.finish() % self.dimension as u64) as usize] += 1.0;
        }
        if !normalize(&mut v) {
            return Err(EmbedError::EmptyText);
        }
        Ok(v)
    }
}

impl Default for HashEmbedder {
    fn default() -> Self {
        HashEmbedder::new(Self::DEFAULT_DIMENSION)
    }
}

fn tokens(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty()).map(str::to_lowercase)
}

#[async_trait]
impl Embedder for HashEmbedder {
    fn id(&self) -> String {
        format!("hash-fnv1a-{}", self.dimension)
    }

    fn dimension(&self) -> usize {
        self.dimension
    }

    async fn embed(&self, text: &str) -> Result<Vec<f32>, EmbedError> {
        self.embed_sync(text)
    }
}

/// Client for an OpenAI-style `POST {base_url}/embeddings` endpoint.
#[derive(Debug, Clone)]
pub struct HttpEmbedder {
    client: reqwest::Client,
    base_url: String,
    model: String,
    api_key: Option<String>,
    dimension: usize,
}

#[derive(Deserialize)]
struct EmbeddingResponse {
    data: Vec<EmbeddingDatum>,
}

#[derive(Deserialize)]
struct EmbeddingDatum {
    embedding: Vec<f32>,
}

impl HttpEmbedder {
    pub fn new(base_url: &str, model: &str, api_key: Option<String>, dimension: usize, timeout: Duration) -> Self {
        let client = reqwest::Client::builder().timeout(timeout).build().expect("http client");
        HttpEmbedder {
            client,
            base_url: base_url.trim_end_matches('/').to_string(),
            model: model.to_string(),
            api_key,
            dimension,
        }
    }
}

#[async_trait]
impl Embedder for HttpEmbedder {
    fn id(&self) -> String {
        format!("http:{}", self.model)
    }

    fn dimension(&self) -> usize {
        self.dimension
    }

    async fn embed(&self, text: &str) -> Result<Vec<f32>, EmbedError> {
        if text.trim().is_empty() {
            return Err(EmbedError::EmptyText);
        }
        let mut req = self
            .client
            .post(format!("{}/embeddings", self.base_url))
            .json(&serde_json::json!({ "model": self.model, "input": text }));
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().await.map_err(|e| EmbedError::Backend(e.to_string()))?;
        let status = resp.status();
        if !status.is_success() {
            return Err(EmbedError::Backend(format!("status {status}")));
        }
        let body: EmbeddingResponse = resp.json().await.map_err(|e| EmbedError::Backend(e.to_string()))?;
        let mut v = body
            .data
            .into_iter()
            .next()
            .ok_or_else(|| EmbedError::Backend("response has no embedding".into()))?
            .embedding;
        if v.len() != self.dimension {
            return Err(EmbedError::Dimension { expected: self.dimension, found: v.len() });
        }
        if !normalize(&mut v) {
            return Err(EmbedError::Backend("zero embedding".into()));
        }
        Ok(v)
    }
}
