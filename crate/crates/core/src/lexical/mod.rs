//! Lexical retrieval: inverted-index construction, BM25 scoring in its
//! sparse-vector formulation, topic-to-query construction, and pseudo / true
//! relevance-feedback expansion.

mod expand;
mod index;
mod porter;
mod search;
mod tokenize;

pub use expand::{pseudo_feedback_expand, relevance_feedback_expand, FeedbackExpansion};
pub use index::{FieldSource, InvertedIndex, Posting};
pub use tokenize::tokenize;

use std::collections::BTreeMap;

use thiserror::Error;

use crate::io::Topic;

/// Errors from index construction, scoring, and persistence.
#[derive(Debug, Error)]
pub enum LexicalError {
    #[error("cannot build an index over an empty corpus (avg_doc_len undefined)")]
    EmptyCorpus,
    #[error("unknown doc ordinal {0}")]
    UnknownDoc(u32),
    #[error("topic {0}: field selection produced no query tokens")]
    EmptyQuery(u32),
    #[error("invalid BM25 parameters: {0}")]
    InvalidParams(String),
    #[error("index file: {0}")]
    Persist(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// BM25 parameters: `k` saturates term frequency, `b` in `[0, 1]` controls
/// document-length normalization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bm25Params {
    pub k: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        // The conventional defaults; the systems this models ran stock
        // engine settings.
        Bm25Params { k: 1.2, b: 0.75 }
    }
}

impl Bm25Params {
    pub(crate) fn validate(&self) -> Result<(), LexicalError> {
        if !(self.k.is_finite() && self.k >= 0.0) {
            return Err(LexicalError::InvalidParams(format!(
                "k must be a non-negative real, got {}",
                self.k
            )));
        }
        if !(self.b.is_finite() && (0.0..=1.0).contains(&self.b)) {
            return Err(LexicalError::InvalidParams(format!(
                "b must lie in [0, 1], got {}",
                self.b
            )));
        }
        Ok(())
    }
}

/// A bag-of-words query: a token multiset plus optional per-term weights.
///
/// A term with no explicit weight counts with weight 1.0 per occurrence;
/// expansion terms carry weights in `(0, 1]`. The query's sparse-vector
/// encoding assigns each distinct term `multiplicity x weight`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct QuerySpec {
    /// Token multiset in insertion order.
    pub terms: Vec<String>,
    /// Per-term weights; terms absent here weigh 1.0. All weights > 0.
    pub weights: BTreeMap<String, f64>,
}

impl QuerySpec {
    pub fn from_terms(terms: Vec<String>) -> Self {
        QuerySpec {
            terms,
            weights: BTreeMap::new(),
        }
    }

    pub fn weight(&self, term: &str) -> f64 {
        self.weights.get(term).copied().unwrap_or(1.0)
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Collapse the multiset into per-distinct-term effective weights
    /// (`multiplicity x weight`), sorted by term. Scoring iterates this in
    /// order so floating-point accumulation is canonical.
    pub fn effective_weights(&self) -> BTreeMap<&str, f64> {
        let mut counts: BTreeMap<&str, f64> = BTreeMap::new();
        for term in &self.terms {
            *counts.entry(term.as_str()).or_insert(0.0) += 1.0;
        }
        for (term, count) in counts.iter_mut() {
            *count *= self.weight(term);
        }
        counts
    }
}

/// The topic fields a query can draw from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum TopicField {
    Query,
    Question,
    Narrative,
}

impl TopicField {
    fn text<'t>(&self, topic: &'t Topic) -> &'t str {
        match self {
            TopicField::Query => &topic.query,
            TopicField::Question => &topic.question,
            TopicField::Narrative => &topic.narrative,
        }
    }
}

/// Build a query from a topic by concatenating the selected fields (always
/// in the order query, question, narrative) and tokenizing the result with
/// the index tokenizer. All weights are 1.
///
/// Errors if the selection is empty or yields no tokens.
pub fn make_query(topic: &Topic, fields: &[TopicField]) -> Result<QuerySpec, LexicalError> {
    let mut selected: Vec<TopicField> = fields.to_vec();
    selected.sort();
    selected.dedup();
    if selected.is_empty() {
        return Err(LexicalError::EmptyQuery(topic.number));
    }
    let text = selected
        .iter()
        .map(|f| f.text(topic))
        .collect::<Vec<_>>()
        .join(" ");
    let terms = tokenize(&text);
    if terms.is_empty() {
        return Err(LexicalError::EmptyQuery(topic.number));
    }
    Ok(QuerySpec::from_terms(terms))
}
