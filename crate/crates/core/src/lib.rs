//! Coffee-leaf disease diagnosis: detection post-processing and evaluation,
//! knowledge-base retrieval, grounded chat, and the HTTP service around them.

pub mod detect;
pub mod embed;
pub mod eval;
pub mod ingest;
pub mod llmclient;
pub mod pipeline;
pub mod ragchat;
pub mod retry;
pub mod service;
pub mod vectorstore;
