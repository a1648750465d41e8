use std::time::Duration;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use tokio::sync::Semaphore;

use super::{EmbedError, EmbeddingConfig, EmbeddingProvider, EmbeddingVector};
use crate::retry::{post_json, PostFailure, RetryPolicy};

/// Request body of the embeddings endpoint.
#[derive(Debug, Serialize)]
pub struct EmbeddingRequest<'a> {
    pub input: &'a [String],
    pub model: &'a str,
}

#[derive(Debug, Deserialize)]
struct EmbeddingResponse {
    data: Vec<EmbeddingDatum>,
}

#[derive(Debug, Deserialize)]
struct EmbeddingDatum {
    embedding: Vec<f64>,
    #[serde(default)]
    index: Option<usize>,
}

/// Client for `{"input":[..],"model":..}` → `{"data":[{"embedding":[..]}]}` endpoints.
pub struct RemoteEmbedder {
    client: reqwest::Client,
    url: String,
    model: String,
    dim: usize,
    api_key_env: Option<String>,
    batch_size: usize,
    retry: RetryPolicy,
    permits: Semaphore,
}

impl RemoteEmbedder {
    pub fn from_config(cfg: &EmbeddingConfig) -> Result<Self, EmbedError> {
        cfg.validate()?;
        let url = cfg.url.clone().ok_or_else(|| EmbedError::Config("missing url".into()))?;
        let client = reqwest::Client::builder()
            .timeout(Duration::from_secs_f64(cfg.timeout_secs))
            .build()
            .map_err(|e| EmbedError::Config(e.to_string()))?;
        Ok(RemoteEmbedder {
            client,
            url,
            model: cfg.model.clone(),
            dim: cfg.dim,
            api_key_env: cfg.api_key_env.clone(),
            batch_size: cfg.batch_size,
            retry: cfg.retry.clone(),
            permits: Semaphore::new(cfg.max_in_flight),
        })
    }

    async fn embed_batch(&self, batch: &[String]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        let body = serde_json::to_vec(&EmbeddingRequest { input: batch, model: &self.model })
            .map_err(|e| EmbedError::Protocol(e.to_string()))?;
        let key = self.api_key_env.as_deref().and_then(|name| std::env::var(name).ok());

        let _permit = self.permits.acquire().await.map_err(|e| EmbedError::Transport(e.to_string()))?;
        let raw = post_json(&self.client, &self.url, key.as_deref(), &body, &self.retry)
            .await
            .map_err(|f| match f {
                PostFailure::Auth { status, body } => {
                    EmbedError::Config(format!("embedding endpoint rejected credentials (HTTP {status}): {body}"))
                }
                PostFailure::Rejected { status, body } => {
                    EmbedError::Protocol(format!("HTTP {status}: {body}"))
                }
                PostFailure::Exhausted { attempts, last } => {
                    EmbedError::Transport(format!("gave up after {attempts} attempts: {last}"))
                }
            })?;

        let mut resp: EmbeddingResponse =
            serde_json::from_slice(&raw).map_err(|e| EmbedError::Protocol(format!("bad response body: {e}")))?;
        if resp.data.len() != batch.len() {
            return Err(EmbedError::Protocol(format!(
                "expected {} embeddings, got {}",
                batch.len(),
                resp.data.len()
            )));
        }
        if resp.data.iter().all(|d| d.index.is_some()) {
            resp.data.sort_by_key(|d| d.index);
        }
        resp.data
            .into_iter()
            .map(|d| {
                let v = EmbeddingVector::new(d.embedding);
                if v.dim() != self.dim {
                    return Err(EmbedError::Config(format!(
                        "provider returned dim {} but {} is configured",
                        v.dim(),
                        self.dim
                    )));
                }
                if !v.is_finite() {
                    return Err(EmbedError::Protocol("non-finite embedding value".into()));
                }
                Ok(v.normalized())
            })
            .collect()
    }
}

#[async_trait]
impl EmbeddingProvider for RemoteEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn kind(&self) -> &'static str {
        "remote"
    }

    async fn embed_texts(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        let mut out = Vec::with_capacity(texts.len());
        for batch in texts.chunks(self.batch_size) {
            out.extend(self.embed_batch(batch).await?);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn request_shape() {
        let input = vec!["a".to_string(), "b \"q\"".into()];
        let body = serde_json::to_string(&EmbeddingRequest { input: &input, model: "m" }).unwrap();
        assert_eq!(body, r#"{"input":["a","b \"q\""],"model":"m"}"#);
    }
}
