//! JSON-Lines corpus loading: one document object per line.

use serde::Deserialize;

use super::IoError;

/// A corpus document. At least one of `abstract_text` / `full_text` is
/// non-empty; `doc_id` contains no whitespace.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Doc {
    pub doc_id: String,
    pub title: String,
    pub abstract_text: String,
    pub full_text: String,
}

#[derive(Deserialize)]
struct RawDoc {
    doc_id: String,
    #[serde(default)]
    title: String,
    #[serde(default, rename = "abstract")]
    abstract_text: String,
    #[serde(default)]
    full_text: String,
}

/// Parse a JSON-Lines corpus. Keys: `doc_id` (required), `title`,
/// `abstract`, `full_text` (optional, default empty). File order is
/// preserved; doc ids must be unique.
pub fn load_corpus(jsonl_text: &str) -> Result<Vec<Doc>, IoError> {
    let mut docs = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (idx, line) in jsonl_text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawDoc = serde_json::from_str(line).map_err(|e| IoError::Malformed {
            line: line_no,
            message: e.to_string(),
        })?;
        if raw.doc_id.is_empty() || raw.doc_id.chars().any(char::is_whitespace) {
            return Err(IoError::Malformed {
                line: line_no,
                message: format!("doc_id `{}` must be a non-empty token", raw.doc_id),
            });
        }
        if !seen.insert(raw.doc_id.clone()) {
            return Err(IoError::DuplicateDoc(raw.doc_id));
        }
        if raw.abstract_text.is_empty() && raw.full_text.is_empty() {
            return Err(IoError::EmptyDoc(raw.doc_id));
        }
        docs.push(Doc {
            doc_id: raw.doc_id,
            title: raw.title,
            abstract_text: raw.abstract_text,
            full_text: raw.full_text,
        });
    }
    Ok(docs)
}
