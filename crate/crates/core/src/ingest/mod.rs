//! Knowledge-base loading and chunking.

mod documents;
mod splitter;

use std::path::Path;

use serde::{Deserialize, Serialize};

pub use documents::{load_documents, parse_front_matter, Document};
pub use splitter::{split_text, ChunkSpec, TextSpan, DEFAULT_CHUNK_SIZE, DEFAULT_OVERLAP};

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("chunking configuration: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(String),
    #[error("{0} is not valid UTF-8")]
    InvalidUtf8(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CharSpan {
    pub start: usize,
    pub end: usize,
}

/// A retrievable passage of a knowledge-base document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chunk {
    /// `source_id#ordinal`
    pub chunk_id: String,
    pub source_id: String,
    pub ordinal: usize,
    pub text: String,
    pub char_span: CharSpan,
}

pub fn chunk_document(doc: &Document, spec: &ChunkSpec) -> Result<Vec<Chunk>, IngestError> {
    Ok(split_text(&doc.body, spec)?
        .into_iter()
        .enumerate()
        .map(|(ordinal, span)| Chunk {
            chunk_id: format!("{}#{ordinal}", doc.source_id),
            source_id: doc.source_id.clone(),
            ordinal,
            text: span.text,
            char_span: CharSpan { start: span.start, end: span.end },
        })
        .collect())
}

pub fn chunk_documents(docs: &[Document], spec: &ChunkSpec) -> Result<Vec<Chunk>, IngestError> {
    let mut out = Vec::new();
    for doc in docs {
        out.extend(chunk_document(doc, spec)?);
    }
    Ok(out)
}

/// Loads and chunks a knowledge-base directory.
pub fn ingest(root: &Path, spec: &ChunkSpec) -> Result<Vec<Chunk>, IngestError> {
    spec.validate()?;
    chunk_documents(&load_documents(root)?, spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_kb() {
        let dir = tempfile::tempdir().unwrap();
        assert!(ingest(dir.path(), &ChunkSpec::default()).unwrap().is_empty());
    }

    #[test]
    fn single_chunk_id() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("doc.md"), "Phoma leaf spot.").unwrap();
        let chunks = ingest(dir.path(), &ChunkSpec::default()).unwrap();
        assert_eq!(chunks.len(), 1);
        assert_eq!(chunks[0].chunk_id, "doc.md#0");
        assert_eq!(chunks[0].char_span, CharSpan { start: 0, end: 16 });
    }

    #[test]
    fn rerun_is_identical() {
        let dir = tempfile::tempdir().unwrap();
        let long = "Cercospora leaf spot causes brown eye spots. ".repeat(60);
        std::fs::write(dir.path().join("c.md"), &long).unwrap();
        std::fs::write(dir.path().join("m.txt"), "Leaf miner larvae tunnel inside leaves.").unwrap();
        let spec = ChunkSpec::new(200, 40).unwrap();
        let a = ingest(dir.path(), &spec).unwrap();
        let b = ingest(dir.path(), &spec).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        assert!(a.len() > 2);
        let ordinals: Vec<_> = a.iter().filter(|c| c.source_id == "c.md").map(|c| c.ordinal).collect();
        assert_eq!(ordinals, (0..ordinals.len()).collect::<Vec<_>>());
    }
}
