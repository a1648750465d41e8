//! Retrieval-then-read: query formation, context retrieval, prompt assembly with
//! windowed memory, and source attribution.

use std::sync::Arc;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::detect::Detection;
use crate::embed::{EmbedError, EmbeddingProvider};
use crate::llmclient::{ChatMessage, ChatModel, LlmError};
use crate::vectorstore::{ScoredChunk, StoreError, VectorStore, DEFAULT_K};

pub const DEFAULT_WINDOW_SIZE: usize = 5;
pub const DEFAULT_MAX_CONTEXT_CHARS: usize = 4_000;

pub const HEALTHY_QUERY: &str = "No disease detected. Provide general coffee leaf care guidance.";
pub const NOT_COVERED: &str = "not covered by the knowledge base";

const SYSTEM_INSTRUCTION: &str = "You are an agronomy assistant for coffee leaf diseases. \
Answer using only the knowledge-base context below. \
If the context does not contain the answer, reply that the topic is not covered by the knowledge base. \
Do not invent facts.";

const NO_CONTEXT_NOTICE: &str = "No knowledge-base passages were found for this question. \
Tell the user that it is not covered by the knowledge base.";

#[derive(Debug, thiserror::Error)]
pub enum RagError {
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error("invalid question: {0}")]
    InvalidQuestion(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RagConfig {
    /// Chunks retrieved per turn.
    pub k: usize,
    /// Exchanges (user + assistant pairs) visible to the prompt.
    pub window_size: usize,
    pub max_context_chars: usize,
    /// Retrieved chunks scoring at or below this are left out of the context.
    pub min_score: f64,
}

impl Default for RagConfig {
    fn default() -> Self {
        RagConfig {
            k: DEFAULT_K,
            window_size: DEFAULT_WINDOW_SIZE,
            max_context_chars: DEFAULT_MAX_CONTEXT_CHARS,
            min_score: 0.0,
        }
    }
}

impl RagConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.k == 0 {
            return Err("rag.k must be at least 1".into());
        }
        if self.max_context_chars == 0 {
            return Err("rag.max_context_chars must be positive".into());
        }
        if !self.min_score.is_finite() {
            return Err("rag.min_score must be finite".into());
        }
        Ok(())
    }
}

/// Timestamp source for chat turns. `Fixed` makes transcripts replayable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Clock {
    System,
    Fixed(u64),
}

impl Clock {
    pub fn now_ms(&self) -> u64 {
        match self {
            Clock::System => SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_millis() as u64)
                .unwrap_or(0),
            Clock::Fixed(t) => *t,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TurnRole {
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SourceRef {
    pub source_id: String,
    pub chunk_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatTurn {
    pub role: TurnRole,
    pub content: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sources: Vec<SourceRef>,
    pub timestamp_ms: u64,
}

#[derive(Debug, Clone)]
pub struct Session {
    pub session_id: String,
    pub window_size: usize,
    pub detections: Vec<Detection>,
    turns: Vec<ChatTurn>,
}

impl Session {
    pub fn new(session_id: impl Into<String>, window_size: usize, detections: Vec<Detection>) -> Self {
        Session { session_id: session_id.into(), window_size, detections, turns: Vec::new() }
    }

    /// Full transcript.
    pub fn turns(&self) -> &[ChatTurn] {
        &self.turns
    }

    pub fn exchange_count(&self) -> usize {
        self.turns.len() / 2
    }

    /// The `window_size` most recent exchanges, oldest first.
    pub fn window(&self) -> &[ChatTurn] {
        let keep = (2 * self.window_size).min(self.turns.len());
        &self.turns[self.turns.len() - keep..]
    }

    pub fn disease_names(&self) -> Vec<String> {
        ranked_names(&self.detections)
    }

    fn push_exchange(&mut self, user: ChatTurn, assistant: ChatTurn) {
        self.turns.push(user);
        self.turns.push(assistant);
    }
}

/// Class names, deduplicated, by descending max confidence (ties keep first appearance).
fn ranked_names(detections: &[Detection]) -> Vec<String> {
    let mut best: Vec<(String, f64)> = Vec::new();
    for d in detections {
        match best.iter_mut().find(|(n, _)| *n == d.class_name) {
            Some((_, c)) => *c = c.max(d.confidence),
            None => best.push((d.class_name.clone(), d.confidence)),
        }
    }
    // stable sort keeps first-appearance order among equal confidences
    best.sort_by(|a, b| b.1.total_cmp(&a.1));
    best.into_iter().map(|(n, _)| n).collect()
}

pub fn form_query(detections: &[Detection]) -> String {
    let names = ranked_names(detections);
    if names.is_empty() {
        return HEALTHY_QUERY.to_string();
    }
    format!(
        "Detected disease(s): {}. Describe the disease, its causes, symptoms, and recommended remedies.",
        names.join(", ")
    )
}

/// Retrieval text for a follow-up: the question, prefixed with the session's diseases.
pub fn follow_up_query(disease_names: &[String], question: &str) -> String {
    if disease_names.is_empty() {
        question.to_string()
    } else {
        format!("{}: {question}", disease_names.join(", "))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextEntry {
    pub chunk_id: String,
    pub source_id: String,
    pub text: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub system: String,
    pub context: Vec<ContextEntry>,
    pub history: Vec<ChatTurn>,
    pub question: String,
}

impl PromptBundle {
    pub fn context_block(&self) -> String {
        if self.context.is_empty() {
            return NO_CONTEXT_NOTICE.to_string();
        }
        self.context
            .iter()
            .map(|c| format!("[source: {}] {}", c.chunk_id, c.text))
            .collect::<Vec<_>>()
            .join("\n\n")
    }

    /// One system message (instruction + context), the window oldest first, then the question.
    pub fn to_messages(&self) -> Vec<ChatMessage> {
        let mut out = Vec::with_capacity(self.history.len() + 2);
        out.push(ChatMessage::system(format!("{}\n\nContext:\n{}", self.system, self.context_block())));
        for t in &self.history {
            out.push(match t.role {
                TurnRole::User => ChatMessage::user(t.content.clone()),
                TurnRole::Assistant => ChatMessage::assistant(t.content.clone()),
            });
        }
        out.push(ChatMessage::user(self.question.clone()));
        out
    }

    pub fn sources(&self) -> Vec<SourceRef> {
        let mut seen = std::collections::HashSet::new();
        self.context
            .iter()
            .filter(|c| seen.insert(c.chunk_id.clone()))
            .map(|c| SourceRef { source_id: c.source_id.clone(), chunk_id: c.chunk_id.clone() })
            .collect()
    }
}

pub fn build_prompt(question: &str, retrieved: &[ScoredChunk], history: &[ChatTurn], cfg: &RagConfig) -> PromptBundle {
    let mut context: Vec<ContextEntry> = retrieved
        .iter()
        .filter(|s| s.score > cfg.min_score)
        .take(cfg.k)
        .map(|s| ContextEntry {
            chunk_id: s.chunk.chunk_id.clone(),
            source_id: s.chunk.source_id.clone(),
            text: s.chunk.text.clone(),
            score: s.score,
        })
        .collect();
    // retrieved is sorted best-first, so popping drops the weakest chunk
    while context.iter().map(|c| c.text.chars().count()).sum::<usize>() > cfg.max_context_chars {
        context.pop();
    }
    PromptBundle {
        system: SYSTEM_INSTRUCTION.to_string(),
        context,
        history: history.to_vec(),
        question: question.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Answer {
    pub text: String,
    pub sources: Vec<SourceRef>,
    /// Chunk ids returned by this turn's retrieval.
    pub retrieved: Vec<String>,
    pub model_name: String,
    /// False when no passage made it into the context.
    pub covered: bool,
    pub latency_ms: u64,
}

pub struct RagEngine {
    embedder: Arc<dyn EmbeddingProvider>,
    llm: Arc<dyn ChatModel>,
    config: RagConfig,
    clock: Clock,
}

impl RagEngine {
    pub fn new(embedder: Arc<dyn EmbeddingProvider>, llm: Arc<dyn ChatModel>, config: RagConfig) -> Self {
        RagEngine { embedder, llm, config, clock: Clock::System }
    }

    pub fn with_clock(mut self, clock: Clock) -> Self {
        self.clock = clock;
        self
    }

    pub fn config(&self) -> &RagConfig {
        &self.config
    }

    pub fn embedder(&self) -> &Arc<dyn EmbeddingProvider> {
        &self.embedder
    }

    pub fn model_name(&self) -> &str {
        self.llm.model_name()
    }

    pub async fn retrieve(&self, store: &VectorStore, query: &str, k: usize) -> Result<Vec<ScoredChunk>, RagError> {
        if store.dim() != self.embedder.dim() {
            return Err(EmbedError::DimensionMismatch { expected: store.dim(), got: self.embedder.dim() }.into());
        }
        if store.is_empty() {
            return Ok(Vec::new());
        }
        let mut v = self.embedder.embed_texts(&[query.to_string()]).await?;
        let q = v.pop().ok_or_else(|| EmbedError::Protocol("provider returned no vector".into()))?;
        Ok(store.search(&q, k)?)
    }

    /// Runs one turn. `retrieval_query` is what gets embedded; `question` is what the
    /// model and the transcript see. The session is only touched on success.
    pub async fn answer_with_query(
        &self,
        store: &VectorStore,
        session: &mut Session,
        question: &str,
        retrieval_query: &str,
    ) -> Result<(Answer, PromptBundle), RagError> {
        if question.trim().is_empty() {
            return Err(RagError::InvalidQuestion("message must not be empty".into()));
        }
        let started = Instant::now();
        let asked_at = self.clock.now_ms();
        let retrieved = self.retrieve(store, retrieval_query, self.config.k).await?;
        let bundle = build_prompt(question, &retrieved, session.window(), &self.config);
        let completion = self.llm.complete(&bundle.to_messages()).await?;

        let sources = bundle.sources();
        let answer = Answer {
            text: completion.text,
            covered: !sources.is_empty(),
            sources,
            retrieved: retrieved.iter().map(|s| s.chunk.chunk_id.clone()).collect(),
            model_name: self.llm.model_name().to_string(),
            latency_ms: started.elapsed().as_millis() as u64,
        };
        session.push_exchange(
            ChatTurn { role: TurnRole::User, content: question.to_string(), sources: Vec::new(), timestamp_ms: asked_at },
            ChatTurn {
                role: TurnRole::Assistant,
                content: answer.text.clone(),
                sources: answer.sources.clone(),
                timestamp_ms: self.clock.now_ms(),
            },
        );
        Ok((answer, bundle))
    }

    /// Follow-up turn: retrieval uses the question prefixed with the session's diseases.
    pub async fn answer(&self, store: &VectorStore, session: &mut Session, question: &str) -> Result<Answer, RagError> {
        let query = follow_up_query(&session.disease_names(), question);
        Ok(self.answer_with_query(store, session, question, &query).await?.0)
    }

    /// Opening turn of a diagnosis session: the formed query is both question and retrieval text.
    pub async fn diagnose(&self, store: &VectorStore, session: &mut Session) -> Result<Answer, RagError> {
        let query = form_query(&session.detections);
        Ok(self.answer_with_query(store, session, &query, &query).await?.0)
    }
}
