//! Document ingestion and exact cosine top-k retrieval.

mod chunking;
mod embed;
mod persist;
pub mod vector;

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use parking_lot::{Mutex, RwLock};
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

pub use chunking::{chunk_text, TextSpan};
pub use embed::{EmbedError, Embedder, HashEmbedder, HttpEmbedder};
pub use persist::{CollectionFile, PersistError};

pub const DEFAULT_CHUNK_SIZE: usize = 1000;
pub const DEFAULT_OVERLAP: usize = 200;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, JsonSchema)]
pub struct ChunkId {
    pub doc_id: String,
    pub ordinal: u32,
}

impl fmt::Display for ChunkId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}", self.doc_id, self.ordinal)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct Chunk {
    pub chunk_id: ChunkId,
    pub text: String,
    /// Unit length.
    pub vector: Vec<f32>,
    pub source_title: String,
    /// Offset of `text` within the source document, in chars.
    pub char_start: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct RetrievedChunk {
    pub chunk: Chunk,
    /// Cosine similarity in [-1, 1].
    pub score: f64,
    /// 1-based.
    pub rank: usize,
}

#[derive(Debug, thiserror::Error)]
pub enum RagError {
    #[error("document body is empty")]
    EmptyDocument,
    #[error("invalid chunking parameters: size {chunk_size}, overlap {overlap} (need 0 <= overlap < size)")]
    BadChunkParams { chunk_size: usize, overlap: usize },
    #[error("the store holds no chunks")]
    EmptyStore,
    #[error("k must be at least 1")]
    BadK,
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Persist(#[from] PersistError),
}

/// In-memory exact-search index, optionally backed by a collection file.
///
/// Ingest swaps a document's chunks under the write lock, so concurrent
/// queries see either the old or the new version, never a mix.
pub struct VectorStore {
    embedder: Arc<dyn Embedder>,
    chunks: RwLock<BTreeMap<ChunkId, Chunk>>,
    file: Option<Mutex<CollectionFile>>,
}

impl VectorStore {
    pub fn in_memory(embedder: Arc<dyn Embedder>) -> Self {
        VectorStore { embedder, chunks: RwLock::new(BTreeMap::new()), file: None }
    }

    /// Opens (or creates) a persisted collection, replaying its records.
    pub fn open(path: &Path, embedder: Arc<dyn Embedder>) -> Result<Self, RagError> {
        let (file, chunks) = CollectionFile::open(path, &embedder.id(), embedder.dimension())?;
        let chunks = chunks.into_iter().map(|c| (c.chunk_id.clone(), c)).collect();
        Ok(VectorStore { embedder, chunks: RwLock::new(chunks), file: Some(Mutex::new(file)) })
    }

    pub fn embedder(&self) -> &Arc<dyn Embedder> {
        &self.embedder
    }

    pub fn len(&self) -> usize {
        self.chunks.read().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn document_ids(&self) -> Vec<String> {
        let chunks = self.chunks.read();
        let mut ids: Vec<String> = chunks.keys().map(|k| k.doc_id.clone()).collect();
        ids.dedup();
        ids
    }

    /// Chunks, embeds and stores a document, replacing any previous version
    /// with the same `doc_id`. Returns the number of chunks stored.
    pub async fn ingest(
        &self,
        doc_id: &str,
        title: &str,
        body: &str,
        chunk_size: usize,
        overlap: usize,
    ) -> Result<usize, RagError> {
        let spans = chunk_text(body, chunk_size, overlap)?;
        let mut fresh = Vec::with_capacity(spans.len());
        for (ordinal, span) in spans.into_iter().enumerate() {
            let vector = self.embedder.embed(&span.text).await?;
            fresh.push(Chunk {
                chunk_id: ChunkId { doc_id: doc_id.to_string(), ordinal: ordinal as u32 },
                text: span.text,
                vector,
                source_title: title.to_string(),
                char_start: span.char_start,
            });
        }

        let mut chunks = self.chunks.write();
        if let Some(file) = &self.file {
            file.lock().append_document(doc_id, &fresh)?;
        }
        chunks.retain(|id, _| id.doc_id != doc_id);
        let count = fresh.len();
        chunks.extend(fresh.into_iter().map(|c| (c.chunk_id.clone(), c)));
        Ok(count)
    }

    /// Exact top-k by cosine similarity; ties go to the smaller chunk id.
    pub async fn query(&self, text: &str, k: usize) -> Result<Vec<RetrievedChunk>, RagError> {
        if k == 0 {
            return Err(RagError::BadK);
        }
        if self.is_empty() {
            return Err(RagError::EmptyStore);
        }
        let q = self.embedder.embed(text).await?;
        Ok(self.query_vector(&q, k))
    }

    pub fn query_vector(&self, q: &[f32], k: usize) -> Vec<RetrievedChunk> {
        let chunks = self.chunks.read();
        let mut scored: Vec<(f64, &Chunk)> = chunks.values().map(|c| (vector::cosine(q, &c.vector), c)).collect();
        // BTreeMap iteration is already in chunk-id order and the sort is
        // stable, so equal scores keep ascending ids.
        scored.sort_by(|a, b| b.0.total_cmp(&a.0));
        scored
            .into_iter()
            .take(k)
            .enumerate()
            .map(|(i, (score, c))| RetrievedChunk { chunk: c.clone(), score, rank: i + 1 })
            .collect()
    }

    /// Rewrites the backing file with only the live chunks.
    pub fn compact(&self) -> Result<(), RagError> {
        let chunks = self.chunks.read();
        if let Some(file) = &self.file {
            file.lock().compact(chunks.values())?;
        }
        Ok(())
    }

    pub fn all_chunks(&self) -> Vec<Chunk> {
        self.chunks.read().values().cloned().collect()
    }
}
