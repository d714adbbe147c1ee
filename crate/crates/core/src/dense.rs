//! Brute-force exact dense retrieval over precomputed embeddings, and the
//! hybrid dense+BM25 similarity.
//!
//! Embeddings are inputs here; encoder training and inference happen
//! offline. The hybrid similarity concatenates the dense and sparse vector
//! spaces, which reduces to
//!
//! ```text
//! sim(q, d) = lambda * <q_nn, d_nn> + BM25(q, d)
//! ```
//!
//! with `lambda` weighting the dense side.

use std::collections::BTreeMap;
use std::path::Path;

use thiserror::Error;

use crate::io::Topic;
use crate::lexical::{make_query, Bm25Params, InvertedIndex, LexicalError, QuerySpec, TopicField};

/// Errors from vector loading and hybrid scoring.
#[derive(Debug, Error)]
pub enum DenseError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("vector `{id}` has dimension {found}, expected {expected}")]
    DimensionMismatch {
        id: String,
        expected: usize,
        found: usize,
    },
    #[error("vector `{id}` has a non-finite component")]
    NonFinite { id: String },
    #[error("duplicate vector id `{0}`")]
    DuplicateId(String),
    #[error("vector file contains no vectors")]
    NoVectors,
    #[error("no vector for topic {0}")]
    MissingTopic(u32),
    #[error("doc `{0}` missing from the dense store")]
    DocNotInStore(String),
    #[error("doc `{0}` missing from the inverted index")]
    DocNotInIndex(String),
    #[error(transparent)]
    Lexical(#[from] LexicalError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Fixed-dimension real vectors for documents and topics.
///
/// Immutable after load; concurrent searches are safe.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseStore {
    dim: usize,
    doc_vectors: BTreeMap<String, Vec<f64>>,
    topic_vectors: BTreeMap<u32, Vec<f64>>,
}

/// Weights for the hybrid similarity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HybridParams {
    /// Weight of the dense dot product. The reference grid is
    /// {1, 5, 10, 15, 20, 30}; any finite non-negative value is accepted.
    pub lambda: f64,
    pub bm25: Bm25Params,
}

impl DenseStore {
    /// Parse a vector file: one record per line, `id dim v1 v2 ... v_dim`,
    /// with ids prefixed `topic:` or `doc:`. All records must share one
    /// dimension; components must be finite; ids must be unique.
    pub fn parse(text: &str) -> Result<Self, DenseError> {
        let mut dim: Option<usize> = None;
        let mut doc_vectors = BTreeMap::new();
        let mut topic_vectors = BTreeMap::new();

        for (idx, line) in text.lines().enumerate() {
            let line_no = idx + 1;
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split_whitespace();
            let id = fields.next().ok_or_else(|| DenseError::Malformed {
                line: line_no,
                message: "missing id".into(),
            })?;
            let declared: usize = fields.next().and_then(|d| d.parse().ok()).ok_or_else(|| {
                DenseError::Malformed {
                    line: line_no,
                    message: "missing or invalid dimension".into(),
                }
            })?;
            let values: Vec<f64> = fields
                .map(|v| {
                    v.parse::<f64>().map_err(|_| DenseError::Malformed {
                        line: line_no,
                        message: format!("invalid component `{v}`"),
                    })
                })
                .collect::<Result<_, _>>()?;
            if values.len() != declared {
                return Err(DenseError::Malformed {
                    line: line_no,
                    message: format!(
                        "declared dimension {declared} but found {} components",
                        values.len()
                    ),
                });
            }
            let expected = *dim.get_or_insert(declared);
            if declared != expected {
                return Err(DenseError::DimensionMismatch {
                    id: id.to_string(),
                    expected,
                    found: declared,
                });
            }
            if values.iter().any(|v| !v.is_finite()) {
                return Err(DenseError::NonFinite { id: id.to_string() });
            }

            if let Some(doc_id) = id.strip_prefix("doc:") {
                if doc_vectors.insert(doc_id.to_string(), values).is_some() {
                    return Err(DenseError::DuplicateId(id.to_string()));
                }
            } else if let Some(topic) = id.strip_prefix("topic:") {
                let number: u32 = topic.parse().map_err(|_| DenseError::Malformed {
                    line: line_no,
                    message: format!("invalid topic number `{topic}`"),
                })?;
                if topic_vectors.insert(number, values).is_some() {
                    return Err(DenseError::DuplicateId(id.to_string()));
                }
            } else {
                return Err(DenseError::Malformed {
                    line: line_no,
                    message: format!("id `{id}` lacks a `topic:` or `doc:` prefix"),
                });
            }
        }

        match dim {
            None => Err(DenseError::NoVectors),
            Some(dim) => Ok(DenseStore {
                dim,
                doc_vectors,
                topic_vectors,
            }),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, DenseError> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn doc_vector(&self, doc_id: &str) -> Option<&[f64]> {
        self.doc_vectors.get(doc_id).map(Vec::as_slice)
    }

    pub fn topic_vector(&self, topic: u32) -> Option<&[f64]> {
        self.topic_vectors.get(&topic).map(Vec::as_slice)
    }

    pub fn doc_ids(&self) -> impl Iterator<Item = &str> {
        self.doc_vectors.keys().map(String::as_str)
    }

    pub fn topics(&self) -> impl Iterator<Item = u32> + '_ {
        self.topic_vectors.keys().copied()
    }

    pub fn n_docs(&self) -> usize {
        self.doc_vectors.len()
    }

    /// Exact top-K by dot product against every stored document vector,
    /// descending, ties broken by ascending doc id.
    pub fn search(&self, topic_number: u32, k: usize) -> Result<Vec<(String, f64)>, DenseError> {
        let query = self
            .topic_vector(topic_number)
            .ok_or(DenseError::MissingTopic(topic_number))?;
        let mut hits: Vec<(String, f64)> = self
            .doc_vectors
            .iter()
            .map(|(id, v)| (id.clone(), dot(query, v)))
            .collect();
        hits.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        hits.truncate(k);
        Ok(hits)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// The hybrid similarity for one (topic, doc) pair:
/// `lambda * <q_nn, d_nn> + BM25(query, doc)`.
///
/// The document must be present on both sides; the error names the side it
/// is missing from.
pub fn hybrid_score(
    topic_number: u32,
    doc_id: &str,
    store: &DenseStore,
    index: &InvertedIndex,
    query: &QuerySpec,
    params: &HybridParams,
) -> Result<f64, DenseError> {
    let topic_vec = store
        .topic_vector(topic_number)
        .ok_or(DenseError::MissingTopic(topic_number))?;
    let doc_vec = store
        .doc_vector(doc_id)
        .ok_or_else(|| DenseError::DocNotInStore(doc_id.to_string()))?;
    let ordinal = index
        .ordinal(doc_id)
        .ok_or_else(|| DenseError::DocNotInIndex(doc_id.to_string()))?;
    let sparse = index.bm25_score(query, ordinal, &params.bm25)?;
    Ok(params.lambda * dot(topic_vec, doc_vec) + sparse)
}

/// Ranked hybrid hits plus coverage counts for documents that could not be
/// scored because they exist on only one side.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridHits {
    pub hits: Vec<(String, f64)>,
    /// Documents with a vector but no index entry.
    pub store_only: usize,
    /// Indexed documents with no vector.
    pub index_only: usize,
}

/// Hybrid retrieval for one topic: candidates are the documents present in
/// both the dense store and the index; the top K by hybrid score are
/// returned (zero-scored candidates excluded, ties by ascending doc id).
pub fn hybrid_search(
    store: &DenseStore,
    index: &InvertedIndex,
    topic: &Topic,
    fields: &[TopicField],
    params: &HybridParams,
    k: usize,
) -> Result<HybridHits, DenseError> {
    let query = make_query(topic, fields)?;
    let topic_vec = store
        .topic_vector(topic.number)
        .ok_or(DenseError::MissingTopic(topic.number))?;

    let mut hits = Vec::new();
    let mut store_only = 0;
    for (doc_id, doc_vec) in &store.doc_vectors {
        let Some(ordinal) = index.ordinal(doc_id) else {
            store_only += 1;
            continue;
        };
        let sparse = index.bm25_score(&query, ordinal, &params.bm25)?;
        let score = params.lambda * dot(topic_vec, doc_vec) + sparse;
        if score != 0.0 {
            hits.push((doc_id.clone(), score));
        }
    }
    let index_only = (0..index.n_docs() as u32)
        .filter(|&d| !store.doc_vectors.contains_key(index.doc_id(d).unwrap()))
        .count();

    hits.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    hits.truncate(k);
    Ok(HybridHits {
        hits,
        store_only,
        index_only,
    })
}
