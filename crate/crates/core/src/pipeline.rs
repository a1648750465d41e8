//! Knowledge-base directory → embedded store entries.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::embed::{EmbedError, EmbeddingProvider};
use crate::ingest::{chunk_documents, load_documents, ChunkSpec, IngestError};
use crate::vectorstore::{StoreError, VectorStore};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Store(#[from] StoreError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestSummary {
    pub documents: usize,
    pub chunks: usize,
    /// Chunk ids that were not in the store before.
    pub chunks_added: usize,
}

/// Loads, chunks and embeds `root`, upserting every chunk into `store`.
/// The store is left unchanged if any step fails.
pub async fn ingest_into(
    store: &mut VectorStore,
    root: &Path,
    spec: &ChunkSpec,
    embedder: &dyn EmbeddingProvider,
) -> Result<IngestSummary, PipelineError> {
    if embedder.dim() != store.dim() {
        return Err(EmbedError::DimensionMismatch { expected: store.dim(), got: embedder.dim() }.into());
    }
    spec.validate()?;
    let docs = load_documents(root)?;
    let chunks = chunk_documents(&docs, spec)?;
    let texts: Vec<String> = chunks.iter().map(|c| c.text.clone()).collect();
    let vectors = embedder.embed_texts(&texts).await?;
    if vectors.len() != chunks.len() {
        return Err(EmbedError::Protocol(format!("{} texts but {} vectors", chunks.len(), vectors.len())).into());
    }
    let n_chunks = chunks.len();
    let chunks_added = store.add(chunks.into_iter().zip(vectors).collect())?;
    Ok(IngestSummary { documents: docs.len(), chunks: n_chunks, chunks_added })
}
