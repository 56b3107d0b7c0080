#[path = "support/ranking_oracle.rs"]
mod oracle;

use std::sync::Arc;

use matec_core::rag::{HashEmbedder, VectorStore};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[tokio::test]
async fn ranking_equals_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let store = oracle::corpus(&mut rng).await;
    assert_eq!(store.len(), 1000);
    let chunks = store.all_chunks();
    let embedder = HashEmbedder::default();
    for _ in 0..100 {
        let q = oracle::sentence(&mut rng, 4);
        let k = rng.random_range(1..=25);
        let hits = store.query(&q, k).await.unwrap();
        let expected = oracle::rank(&chunks, &embedder.embed_sync(&q).unwrap(), k);
        let got: Vec<_> = hits.iter().map(|h| h.chunk.chunk_id.clone()).collect();
        let want: Vec<_> = expected.iter().map(|(id, _)| id.clone()).collect();
        assert_eq!(got, want, "query {q:?}");
        for (h, (_, s)) in hits.iter().zip(&expected) {
            assert!((h.score - s).abs() < 1e-12);
        }
        assert!(hits.windows(2).all(|w| w[0].score >= w[1].score));
        assert!(hits.iter().enumerate().all(|(i, h)| h.rank == i + 1));
    }
}

#[tokio::test]
async fn duplicates_tie_in_id_order() {
    let store = VectorStore::in_memory(Arc::new(HashEmbedder::default()));
    for id in ["d", "b", "c", "a"] {
        store.ingest(id, id, "blood cultures before antibiotics", 1000, 0).await.unwrap();
    }
    let hits = store.query("blood cultures before antibiotics", 4).await.unwrap();
    let ids: Vec<_> = hits.iter().map(|h| h.chunk.chunk_id.doc_id.as_str()).collect();
    assert_eq!(ids, ["a", "b", "c", "d"]);
}

#[tokio::test]
async fn chunking_keeps_vectors_unit_and_text_bounded() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let store = VectorStore::in_memory(Arc::new(HashEmbedder::default()));
    let body = oracle::sentence(&mut rng, 600);
    let n = store.ingest("long", "long", &body, 300, 60).await.unwrap();
    assert!(n > 5);
    for c in store.all_chunks() {
        assert!(c.text.chars().count() <= 300);
        let norm: f64 = c.vector.iter().map(|x| (*x as f64) * (*x as f64)).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-6);
    }
}
