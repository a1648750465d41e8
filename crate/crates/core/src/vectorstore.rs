//! Exact top-k cosine search over embedded chunks, persisted as versioned JSON lines.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::embed::{cosine_similarity, EmbeddingVector};
use crate::ingest::Chunk;

pub const FORMAT_VERSION: u32 = 1;
pub const DEFAULT_K: usize = 4;

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("dimension mismatch: store has {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("k must be at least 1")]
    InvalidK,
    #[error("unsupported store version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error("corrupt store file at line {line}: {message}")]
    Corrupt { line: usize, message: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoreEntry {
    pub chunk: Chunk,
    pub vector: EmbeddingVector,
    pub insertion_index: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredChunk {
    pub chunk: Chunk,
    pub score: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    version: u32,
    dim: usize,
}

#[derive(Debug, Clone)]
pub struct VectorStore {
    dim: usize,
    entries: Vec<StoreEntry>,
    by_id: HashMap<String, usize>,
    next_index: u64,
}

impl VectorStore {
    pub fn new(dim: usize) -> Self {
        VectorStore { dim, entries: Vec::new(), by_id: HashMap::new(), next_index: 0 }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[StoreEntry] {
        &self.entries
    }

    pub fn get(&self, chunk_id: &str) -> Option<&StoreEntry> {
        self.by_id.get(chunk_id).map(|&i| &self.entries[i])
    }

    /// Upserts entries. A repeated chunk id replaces the stored entry and gets a
    /// fresh insertion index. Returns the number of ids that were not present before.
    /// Nothing is added if any vector has the wrong dimension.
    pub fn add(&mut self, items: Vec<(Chunk, EmbeddingVector)>) -> Result<usize, StoreError> {
        if let Some((_, v)) = items.iter().find(|(_, v)| v.dim() != self.dim) {
            return Err(StoreError::DimensionMismatch { expected: self.dim, got: v.dim() });
        }
        let mut added = 0;
        for (chunk, vector) in items {
            let insertion_index = self.next_index;
            self.next_index += 1;
            match self.by_id.get(&chunk.chunk_id) {
                Some(&slot) => self.entries[slot] = StoreEntry { chunk, vector, insertion_index },
                None => {
                    self.by_id.insert(chunk.chunk_id.clone(), self.entries.len());
                    self.entries.push(StoreEntry { chunk, vector, insertion_index });
                    added += 1;
                }
            }
        }
        Ok(added)
    }

    /// Exact top-k by cosine similarity; ties go to the lower insertion index.
    pub fn search(&self, query: &EmbeddingVector, k: usize) -> Result<Vec<ScoredChunk>, StoreError> {
        if k == 0 {
            return Err(StoreError::InvalidK);
        }
        if query.dim() != self.dim {
            return Err(StoreError::DimensionMismatch { expected: self.dim, got: query.dim() });
        }
        let mut scored: Vec<(f64, u64, usize)> = self
            .entries
            .iter()
            .enumerate()
            .map(|(i, e)| {
                // dims were checked on insert and above
                let s = cosine_similarity(query, &e.vector).unwrap_or(0.0);
                (s, e.insertion_index, i)
            })
            .collect();
        let order = |a: &(f64, u64, usize), b: &(f64, u64, usize)| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1));
        if k < scored.len() {
            scored.select_nth_unstable_by(k - 1, order);
            scored.truncate(k);
        }
        scored.sort_unstable_by(order);
        Ok(scored
            .into_iter()
            .map(|(score, _, i)| ScoredChunk { chunk: self.entries[i].chunk.clone(), score })
            .collect())
    }

    /// Writes the store atomically (temp file + rename).
    pub fn persist(&self, path: &Path) -> Result<(), StoreError> {
        let tmp = path.with_extension(format!(
            "{}.tmp",
            path.extension().and_then(|e| e.to_str()).unwrap_or("jsonl")
        ));
        {
            let mut w = BufWriter::new(std::fs::File::create(&tmp)?);
            let header = Header { version: FORMAT_VERSION, dim: self.dim };
            serde_json::to_writer(&mut w, &header).map_err(std::io::Error::other)?;
            w.write_all(b"\n")?;
            let mut sorted: Vec<&StoreEntry> = self.entries.iter().collect();
            sorted.sort_by_key(|e| e.insertion_index);
            for e in sorted {
                serde_json::to_writer(&mut w, e).map_err(std::io::Error::other)?;
                w.write_all(b"\n")?;
            }
            w.into_inner().map_err(|e| e.into_error())?.sync_all()?;
        }
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, StoreError> {
        let reader = BufReader::new(std::fs::File::open(path)?);
        let mut lines = reader.lines().enumerate();
        let header_line = match lines.next() {
            Some((_, line)) => line?,
            None => return Err(StoreError::Corrupt { line: 1, message: "empty file".into() }),
        };
        let header: Header = serde_json::from_str(&header_line).map_err(|e| StoreError::Corrupt {
            line: 1,
            message: format!("bad header: {e}"),
        })?;
        if header.version != FORMAT_VERSION {
            return Err(StoreError::Version { found: header.version, expected: FORMAT_VERSION });
        }
        let mut store = VectorStore::new(header.dim);
        for (i, line) in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let corrupt = |message: String| StoreError::Corrupt { line: i + 1, message };
            let entry: StoreEntry = serde_json::from_str(&line).map_err(|e| corrupt(e.to_string()))?;
            if entry.vector.dim() != store.dim {
                return Err(corrupt(format!("vector dim {} != {}", entry.vector.dim(), store.dim)));
            }
            if !entry.vector.is_finite() {
                return Err(corrupt("non-finite vector".into()));
            }
            if store.by_id.contains_key(&entry.chunk.chunk_id) {
                return Err(corrupt(format!("duplicate chunk id {}", entry.chunk.chunk_id)));
            }
            store.next_index = store.next_index.max(entry.insertion_index + 1);
            store.by_id.insert(entry.chunk.chunk_id.clone(), store.entries.len());
            store.entries.push(entry);
        }
        Ok(store)
    }
}
