//! Brute-force cosine ranking over every stored chunk.

#![allow(dead_code)]

use std::sync::Arc;

use matec_core::rag::{Chunk, ChunkId, HashEmbedder, VectorStore};
use rand::RngExt;
use rand_chacha::ChaCha8Rng;

pub fn cosine(a: &[f32], b: &[f32]) -> f64 {
    let mut ab = 0.0f64;
    let mut aa = 0.0f64;
    let mut bb = 0.0f64;
    for i in 0..a.len() {
        let (x, y) = (a[i] as f64, b[i] as f64);
        ab += x * y;
        aa += x * x;
        bb += y * y;
    }
    if aa == 0.0 || bb == 0.0 {
        0.0
    } else {
        ab / (aa.sqrt() * bb.sqrt())
    }
}

/// Scores every chunk, orders by score descending then id ascending, and
/// keeps the first `k`.
pub fn rank(chunks: &[Chunk], q: &[f32], k: usize) -> Vec<(ChunkId, f64)> {
    let mut all: Vec<(ChunkId, f64)> = chunks.iter().map(|c| (c.chunk_id.clone(), cosine(q, &c.vector))).collect();
    all.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
    all.truncate(k);
    all
}

pub const VOCAB: [&str; 40] = [
    "sepsis",
    "lactate",
    "cultures",
    "antibiotic",
    "fluid",
    "vasopressor",
    "norepinephrine",
    "endocarditis",
    "murmur",
    "echocardiogram",
    "vancomycin",
    "creatinine",
    "renal",
    "dose",
    "monitoring",
    "oxygen",
    "saturation",
    "respiratory",
    "rate",
    "pressure",
    "systolic",
    "heart",
    "temperature",
    "fever",
    "housing",
    "discharge",
    "shelter",
    "substance",
    "withdrawal",
    "infusion",
    "emboli",
    "pulmonary",
    "nodules",
    "valve",
    "surgery",
    "consult",
    "nurse",
    "pharmacist",
    "score",
    "escalation",
];

pub fn sentence(rng: &mut ChaCha8Rng, words: usize) -> String {
    (0..words).map(|_| VOCAB[rng.random_range(0..VOCAB.len())]).collect::<Vec<_>>().join(" ")
}

/// 1,000 single-chunk documents; every tenth repeats an earlier text so
/// exact score ties occur.
pub async fn corpus(rng: &mut ChaCha8Rng) -> VectorStore {
    let store = VectorStore::in_memory(Arc::new(HashEmbedder::default()));
    let mut texts: Vec<String> = Vec::new();
    for i in 0..1000 {
        let text = if i % 10 == 9 { texts[rng.random_range(0..texts.len())].clone() } else { sentence(rng, 12) };
        store.ingest(&format!("doc{i:04}"), "synthetic", &text, 1000, 0).await.unwrap();
        texts.push(text);
    }
    store
}
