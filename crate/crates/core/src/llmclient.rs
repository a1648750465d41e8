//! Chat-completions client (OpenAI-compatible wire format) with retries.

use std::time::Duration;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};

use crate::retry::{post_json, PostFailure, RetryPolicy};

pub const DEFAULT_ENDPOINT: &str = "https://api.groq.com/openai/v1/chat/completions";
pub const DEFAULT_MODEL: &str = "llama-3.1-8b-instant";

#[derive(Debug, thiserror::Error)]
pub enum LlmError {
    #[error("llm configuration: {0}")]
    Config(String),
    #[error("llm transport failure: {0}")]
    Transport(String),
    #[error("llm protocol: {0}")]
    Protocol(String),
    #[error("llm request rejected (HTTP {status}): {body}")]
    Rejected { status: u16, body: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        ChatMessage { role: Role::System, content: content.into() }
    }
    pub fn user(content: impl Into<String>) -> Self {
        ChatMessage { role: Role::User, content: content.into() }
    }
    pub fn assistant(content: impl Into<String>) -> Self {
        ChatMessage { role: Role::Assistant, content: content.into() }
    }
}

/// Exactly one leading system message, non-empty user/assistant content.
pub fn validate_messages(messages: &[ChatMessage]) -> Result<(), LlmError> {
    match messages.first() {
        Some(m) if m.role == Role::System => {}
        _ => return Err(LlmError::Config("first message must be the system message".into())),
    }
    for m in &messages[1..] {
        if m.role == Role::System {
            return Err(LlmError::Config("only one system message is allowed".into()));
        }
        if m.content.trim().is_empty() {
            return Err(LlmError::Config("user and assistant messages must not be empty".into()));
        }
    }
    if messages.len() < 2 {
        return Err(LlmError::Config("no user message".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompletionConfig {
    pub endpoint: String,
    pub model: String,
    pub temperature: f64,
    pub max_tokens: Option<u32>,
    pub timeout_secs: f64,
    pub api_key_env: Option<String>,
    pub retry: RetryPolicy,
}

impl Default for CompletionConfig {
    fn default() -> Self {
        CompletionConfig {
            endpoint: DEFAULT_ENDPOINT.into(),
            model: DEFAULT_MODEL.into(),
            temperature: 0.2,
            max_tokens: Some(1024),
            timeout_secs: 60.0,
            api_key_env: Some("GROQ_API_KEY".into()),
            retry: RetryPolicy::default(),
        }
    }
}

impl CompletionConfig {
    pub fn validate(&self) -> Result<(), LlmError> {
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(LlmError::Config(format!("temperature {} outside [0, 2]", self.temperature)));
        }
        if !(self.timeout_secs.is_finite() && self.timeout_secs > 0.0) {
            return Err(LlmError::Config("timeout_secs must be positive".into()));
        }
        if self.endpoint.trim().is_empty() || self.model.trim().is_empty() {
            return Err(LlmError::Config("endpoint and model must be set".into()));
        }
        if self.max_tokens == Some(0) {
            return Err(LlmError::Config("max_tokens must be positive".into()));
        }
        Ok(())
    }
}

/// Request body. Field order is fixed, so identical inputs serialize to identical bytes.
#[derive(Debug, Serialize)]
pub struct CompletionRequest<'a> {
    pub model: &'a str,
    pub messages: &'a [ChatMessage],
    pub temperature: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_tokens: Option<u32>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    #[serde(default)]
    pub prompt_tokens: Option<u64>,
    #[serde(default)]
    pub completion_tokens: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Completion {
    pub text: String,
    pub usage: Option<Usage>,
}

#[derive(Debug, Deserialize)]
struct CompletionResponse {
    choices: Vec<Choice>,
    #[serde(default)]
    usage: Option<Usage>,
}

#[derive(Debug, Deserialize)]
struct Choice {
    message: ResponseMessage,
}

#[derive(Debug, Deserialize)]
struct ResponseMessage {
    content: Option<String>,
}

#[async_trait]
pub trait ChatModel: Send + Sync {
    async fn complete(&self, messages: &[ChatMessage]) -> Result<Completion, LlmError>;
    fn model_name(&self) -> &str;
}

pub struct LlmClient {
    client: reqwest::Client,
    config: CompletionConfig,
}

impl LlmClient {
    pub fn new(config: CompletionConfig) -> Result<Self, LlmError> {
        config.validate()?;
        let client = reqwest::Client::builder()
            .timeout(Duration::from_secs_f64(config.timeout_secs))
            .pool_max_idle_per_host(8)
            .build()
            .map_err(|e| LlmError::Config(e.to_string()))?;
        Ok(LlmClient { client, config })
    }

    pub fn request_body(&self, messages: &[ChatMessage]) -> Vec<u8> {
        let req = CompletionRequest {
            model: &self.config.model,
            messages,
            temperature: self.config.temperature,
            max_tokens: self.config.max_tokens,
        };
        serde_json::to_vec(&req).expect("request serializes")
    }
}

pub(crate) fn parse_completion(raw: &[u8]) -> Result<Completion, LlmError> {
    let resp: CompletionResponse =
        serde_json::from_slice(raw).map_err(|e| LlmError::Protocol(format!("bad response body: {e}")))?;
    let first = resp
        .choices
        .into_iter()
        .next()
        .ok_or_else(|| LlmError::Protocol("response has no choices".into()))?;
    let text = first
        .message
        .content
        .ok_or_else(|| LlmError::Protocol("first choice has no content".into()))?;
    Ok(Completion { text, usage: resp.usage })
}

#[async_trait]
impl ChatModel for LlmClient {
    async fn complete(&self, messages: &[ChatMessage]) -> Result<Completion, LlmError> {
        validate_messages(messages)?;
        let body = self.request_body(messages);
        let key = self.config.api_key_env.as_deref().and_then(|n| std::env::var(n).ok());
        let raw = post_json(&self.client, &self.config.endpoint, key.as_deref(), &body, &self.config.retry)
            .await
            .map_err(|f| match f {
                PostFailure::Auth { status, body } => {
                    LlmError::Config(format!("endpoint rejected credentials (HTTP {status}): {body}"))
                }
                PostFailure::Rejected { status, body } => LlmError::Rejected { status, body },
                PostFailure::Exhausted { attempts, last } => {
                    LlmError::Transport(format!("gave up after {attempts} attempts: {last}"))
                }
            })?;
        parse_completion(&raw)
    }

    fn model_name(&self) -> &str {
        &self.config.model
    }
}
