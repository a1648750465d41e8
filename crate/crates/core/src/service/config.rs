use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::detect::DetectorConfig;
use crate::embed::EmbeddingConfig;
use crate::ingest::ChunkSpec;
use crate::llmclient::CompletionConfig;
use crate::ragchat::RagConfig;

pub const DEFAULT_MAX_UPLOAD_BYTES: usize = 10 * 1024 * 1024;
pub const DEFAULT_SESSION_TTL_SECS: u64 = 3_600;

#[derive(Debug, thiserror::Error)]
#[error("invalid configuration: {0}")]
pub struct ConfigError(pub String);

/// Application configuration, read from one TOML file plus `LEAFDX_*` overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AppConfig {
    pub bind: String,
    pub store_path: PathBuf,
    /// Enables `POST /api/ingest`.
    pub admin_enabled: bool,
    pub max_upload_bytes: usize,
    pub session_ttl_secs: u64,
    /// When set, session ids are derived from this seed and a counter instead of being random.
    pub session_seed: Option<String>,
    /// When set, transcript timestamps are pinned to this value.
    pub frozen_time_ms: Option<u64>,
    /// Allowed CORS origins; empty allows any origin.
    pub cors_origins: Vec<String>,
    pub detector: DetectorConfig,
    pub embedding: EmbeddingConfig,
    pub llm: CompletionConfig,
    pub chunking: ChunkSpec,
    pub rag: RagConfig,
}

impl Default for AppConfig {
    fn default() -> Self {
        AppConfig {
            bind: "127.0.0.1:8080".into(),
            store_path: PathBuf::from("data/store.jsonl"),
            admin_enabled: false,
            max_upload_bytes: DEFAULT_MAX_UPLOAD_BYTES,
            session_ttl_secs: DEFAULT_SESSION_TTL_SECS,
            session_seed: None,
            frozen_time_ms: None,
            cors_origins: Vec::new(),
            detector: DetectorConfig::default(),
            embedding: EmbeddingConfig::default(),
            llm: CompletionConfig::default(),
            chunking: ChunkSpec::default(),
            rag: RagConfig::default(),
        }
    }
}

const ENV_PREFIX: &str = "LEAFDX_";

impl AppConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError(e.to_string()))
    }

    /// Reads `path` (or defaults when `None`) and applies environment overrides.
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| ConfigError(format!("{}: {e}", p.display())))?;
                Self::from_toml(&text)?
            }
            None => AppConfig::default(),
        };
        cfg.apply_env(|k| std::env::var(k).ok())?;
        Ok(cfg)
    }

    pub fn apply_env(&mut self, get: impl Fn(&str) -> Option<String>) -> Result<(), ConfigError> {
        let var = |name: &str| get(&format!("{ENV_PREFIX}{name}"));
        if let Some(v) = var("BIND") {
            self.bind = v;
        }
        if let Some(v) = var("STORE_PATH") {
            self.store_path = v.into();
        }
        if let Some(v) = var("ADMIN_ENABLED") {
            self.admin_enabled = match v.to_ascii_lowercase().as_str() {
                "1" | "true" | "yes" => true,
                "0" | "false" | "no" => false,
                _ => return Err(ConfigError(format!("{ENV_PREFIX}ADMIN_ENABLED: cannot parse {v:?}"))),
            };
        }
        if let Some(v) = var("DETECTOR_URL") {
            self.detector.url = Some(v);
        }
        if let Some(v) = var("DETECTOR_LABELS_DIR") {
            self.detector.labels_dir = Some(v.into());
        }
        if let Some(v) = var("EMBEDDING_URL") {
            self.embedding.url = Some(v);
        }
        if let Some(v) = var("LLM_ENDPOINT") {
            self.llm.endpoint = v;
        }
        if let Some(v) = var("LLM_MODEL") {
            self.llm.model = v;
        }
        Ok(())
    }

    /// Settings needed to build or query a store.
    pub fn validate_indexing(&self) -> Result<(), ConfigError> {
        self.embedding.validate().map_err(|e| ConfigError(e.to_string()))?;
        self.chunking.validate().map_err(|e| ConfigError(e.to_string()))?;
        Ok(())
    }

    /// Everything `serve` needs.
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.validate_indexing()?;
        self.detector.validate().map_err(|e| ConfigError(e.to_string()))?;
        self.llm.validate().map_err(|e| ConfigError(e.to_string()))?;
        self.rag.validate().map_err(ConfigError)?;
        if self.chunking.chunk_size > self.rag.max_context_chars {
            return Err(ConfigError(format!(
                "chunking.chunk_size {} exceeds rag.max_context_chars {}",
                self.chunking.chunk_size, self.rag.max_context_chars
            )));
        }
        if self.max_upload_bytes == 0 {
            return Err(ConfigError("max_upload_bytes must be positive".into()));
        }
        if self.session_ttl_secs == 0 {
            return Err(ConfigError("session_ttl_secs must be positive".into()));
        }
        self.bind
            .parse::<std::net::SocketAddr>()
            .map_err(|e| ConfigError(format!("bind {:?}: {e}", self.bind)))?;
        Ok(())
    }
}
