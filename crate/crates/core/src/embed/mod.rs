//! Embedding providers: an offline hashed bag-of-words and a remote embeddings API client.

mod hash;
mod remote;
mod vector;

use std::sync::Arc;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};

use crate::retry::RetryPolicy;

pub use hash::{tokenize, HashEmbedder, DEFAULT_HASH_SEED};
pub use remote::{EmbeddingRequest, RemoteEmbedder};
pub use vector::{cosine_similarity, EmbeddingVector};

pub const DEFAULT_DIM: usize = 384;
pub const DEFAULT_BATCH_SIZE: usize = 64;

#[derive(Debug, thiserror::Error)]
pub enum EmbedError {
    #[error("embedding transport failure: {0}")]
    Transport(String),
    #[error("embedding configuration: {0}")]
    Config(String),
    #[error("embedding protocol: {0}")]
    Protocol(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

#[async_trait]
pub trait EmbeddingProvider: Send + Sync {
    fn dim(&self) -> usize;
    fn kind(&self) -> &'static str;
    /// One vector per input, in input order.
    async fn embed_texts(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, EmbedError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum EmbeddingKind {
    #[default]
    Hash,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbeddingConfig {
    pub kind: EmbeddingKind,
    pub dim: usize,
    pub seed: u64,
    pub url: Option<String>,
    pub model: String,
    /// Name of the environment variable holding the API key.
    pub api_key_env: Option<String>,
    pub batch_size: usize,
    pub max_in_flight: usize,
    pub timeout_secs: f64,
    pub retry: RetryPolicy,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        EmbeddingConfig {
            kind: EmbeddingKind::Hash,
            dim: DEFAULT_DIM,
            seed: DEFAULT_HASH_SEED,
            url: None,
            model: "sentence-transformers/all-MiniLM-L6-v2".into(),
            api_key_env: None,
            batch_size: DEFAULT_BATCH_SIZE,
            max_in_flight: 4,
            timeout_secs: 30.0,
            retry: RetryPolicy::default(),
        }
    }
}

impl EmbeddingConfig {
    pub fn validate(&self) -> Result<(), EmbedError> {
        if self.dim == 0 {
            return Err(EmbedError::Config("dim must be positive".into()));
        }
        if self.batch_size == 0 || self.max_in_flight == 0 {
            return Err(EmbedError::Config("batch_size and max_in_flight must be positive".into()));
        }
        if !(self.timeout_secs.is_finite() && self.timeout_secs > 0.0) {
            return Err(EmbedError::Config("timeout_secs must be positive".into()));
        }
        if self.kind == EmbeddingKind::Remote && self.url.as_deref().is_none_or(str::is_empty) {
            return Err(EmbedError::Config("remote embedding provider needs a url".into()));
        }
        Ok(())
    }

    pub fn build(&self) -> Result<Arc<dyn EmbeddingProvider>, EmbedError> {
        self.validate()?;
        Ok(match self.kind {
            EmbeddingKind::Hash => Arc::new(HashEmbedder::with_seed(self.dim, self.seed)?),
            EmbeddingKind::Remote => Arc::new(RemoteEmbedder::from_config(self)?),
        })
    }
}
