use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use walkdir::WalkDir;

use super::IngestError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    /// Path relative to the knowledge-base root, `/`-separated.
    pub source_id: String,
    pub title: String,
    pub body: String,
    pub metadata: BTreeMap<String, String>,
}

/// Splits an optional `---` front-matter block of `key: value` lines off the text.
pub fn parse_front_matter(text: &str) -> (BTreeMap<String, String>, &str) {
    let mut metadata = BTreeMap::new();
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    let Some(after_open) = text.strip_prefix("---").and_then(|t| {
        t.strip_prefix("\r\n").or_else(|| t.strip_prefix('\n'))
    }) else {
        return (metadata, text);
    };

    let mut offset = 0;
    for line in after_open.split_inclusive('\n') {
        offset += line.len();
        let trimmed = line.trim();
        if trimmed == "---" {
            return (metadata, &after_open[offset..]);
        }
        if let Some((k, v)) = trimmed.split_once(':') {
            let key = k.trim();
            if !key.is_empty() {
                metadata.insert(key.to_string(), v.trim().to_string());
            }
        }
    }
    // unterminated block: treat the file as having no front matter
    (BTreeMap::new(), text)
}

fn is_kb_file(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("md") || e.eq_ignore_ascii_case("txt"))
}

/// Loads every `.md` / `.txt` file under `root`, ordered by source id.
/// Files whose body is blank are skipped.
pub fn load_documents(root: &Path) -> Result<Vec<Document>, IngestError> {
    if !root.is_dir() {
        return Err(IngestError::Io(format!("{} is not a directory", root.display())));
    }
    let mut docs = Vec::new();
    for entry in WalkDir::new(root).follow_links(true) {
        let entry = entry.map_err(|e| IngestError::Io(e.to_string()))?;
        let path = entry.path();
        if !entry.file_type().is_file() || !is_kb_file(path) {
            continue;
        }
        let rel = path.strip_prefix(root).unwrap_or(path);
        let source_id = rel
            .components()
            .map(|c| c.as_os_str().to_string_lossy())
            .collect::<Vec<_>>()
            .join("/");
        let bytes = std::fs::read(path).map_err(|e| IngestError::Io(format!("{}: {e}", path.display())))?;
        let text = String::from_utf8(bytes).map_err(|_| IngestError::InvalidUtf8(source_id.clone()))?;

        let (metadata, rest) = parse_front_matter(&text);
        let body = rest.trim().to_string();
        if body.is_empty() {
            tracing::warn!(%source_id, "skipping document with empty body");
            continue;
        }
        let title = metadata.get("title").cloned().unwrap_or_else(|| {
            path.file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| source_id.clone())
        });
        docs.push(Document { source_id, title, body, metadata });
    }
    docs.sort_by(|a, b| a.source_id.cmp(&b.source_id));
    Ok(docs)
}
