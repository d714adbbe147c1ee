//! Query expansion from feedback documents.
//!
//! Candidate terms from the feedback set F are scored by their KL
//! contribution against the collection C:
//!
//! ```text
//! score(t) = p_F(t) * ln(p_F(t) / p_C(t)),   p_X(t) = cnt_X(t) / |X|
//! ```
//!
//! where `|X|` is the total token count of X. Only positively scored terms
//! (more frequent in the feedback set than in the collection at large) are
//! eligible; the selected terms join the query weighted by their score
//! normalized so the best added term weighs 1.0. Original query terms are
//! never removed or reweighted.

use std::collections::HashSet;

use super::index::InvertedIndex;
use super::{Bm25Params, LexicalError, QuerySpec};
use crate::io::Qrels;

/// Outcome of relevance-feedback expansion. `feedback_docs == 0` flags that
/// no judged-relevant document was retrieved and the query is unchanged.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedbackExpansion {
    pub query: QuerySpec,
    /// Number of documents the expansion terms were drawn from.
    pub feedback_docs: usize,
}

/// Pseudo relevance feedback: expand `query` with the `n_terms` most
/// informative terms from the top `n_docs` retrieved documents.
///
/// Returns the query unchanged when retrieval finds nothing or no candidate
/// term scores positively.
pub fn pseudo_feedback_expand(
    index: &InvertedIndex,
    query: &QuerySpec,
    params: &Bm25Params,
    n_docs: usize,
    n_terms: usize,
) -> Result<QuerySpec, LexicalError> {
    validate_counts(n_docs, n_terms)?;
    let hits = index.search(query, params, n_docs)?;
    let ordinals: Vec<u32> = hits
        .iter()
        .map(|(id, _)| index.ordinal(id).expect("hit came from this index"))
        .collect();
    Ok(expand_from_docs(index, query, &ordinals, n_terms))
}

/// True relevance feedback: as [`pseudo_feedback_expand`], except the
/// feedback set is the `n_docs` highest-ranked retrieved documents judged
/// relevant (grade >= 1) for `topic_number` in `qrels`.
pub fn relevance_feedback_expand(
    index: &InvertedIndex,
    query: &QuerySpec,
    params: &Bm25Params,
    qrels: &Qrels,
    topic_number: u32,
    n_docs: usize,
    n_terms: usize,
) -> Result<FeedbackExpansion, LexicalError> {
    validate_counts(n_docs, n_terms)?;
    let hits = index.search(query, params, index.n_docs())?;
    let ordinals: Vec<u32> = hits
        .iter()
        .filter(|(id, _)| qrels.grade(topic_number, id).unwrap_or(0) >= 1)
        .take(n_docs)
        .map(|(id, _)| index.ordinal(id).expect("hit came from this index"))
        .collect();
    if ordinals.is_empty() {
        return Ok(FeedbackExpansion {
            query: query.clone(),
            feedback_docs: 0,
        });
    }
    let expanded = expand_from_docs(index, query, &ordinals, n_terms);
    Ok(FeedbackExpansion {
        query: expanded,
        feedback_docs: ordinals.len(),
    })
}

fn validate_counts(n_docs: usize, n_terms: usize) -> Result<(), LexicalError> {
    if n_docs == 0 || n_terms == 0 {
        return Err(LexicalError::InvalidParams(
            "expansion needs n_docs >= 1 and n_terms >= 1".into(),
        ));
    }
    Ok(())
}

fn expand_from_docs(
    index: &InvertedIndex,
    query: &QuerySpec,
    feedback: &[u32],
    n_terms: usize,
) -> QuerySpec {
    if feedback.is_empty() {
        return query.clone();
    }
    let feedback_set: HashSet<u32> = feedback.iter().copied().collect();
    let feedback_len: u64 = feedback
        .iter()
        .map(|&d| index.doc_len(d).unwrap_or(0) as u64)
        .sum();
    if feedback_len == 0 {
        return query.clone();
    }
    let existing: HashSet<&str> = query.terms.iter().map(String::as_str).collect();
    let collection_len = index.collection_len() as f64;

    // Index terms are sorted, so candidate order (and thus tie-breaking)
    // is deterministic.
    let mut candidates: Vec<(&str, f64)> = Vec::new();
    for (term, postings) in index.terms() {
        if existing.contains(term) {
            continue;
        }
        let cnt_f: u64 = postings
            .iter()
            .filter(|p| feedback_set.contains(&p.doc))
            .map(|p| p.count as u64)
            .sum();
        if cnt_f == 0 {
            continue;
        }
        let cnt_c: u64 = postings.iter().map(|p| p.count as u64).sum();
        let p_f = cnt_f as f64 / feedback_len as f64;
        let p_c = cnt_c as f64 / collection_len;
        let score = p_f * (p_f / p_c).ln();
        if score > 0.0 {
            candidates.push((term, score));
        }
    }
    if candidates.is_empty() {
        return query.clone();
    }
    candidates.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    candidates.truncate(n_terms);
    let max_score = candidates[0].1;

    let mut expanded = query.clone();
    for (term, score) in candidates {
        expanded.terms.push(term.to_string());
        expanded.weights.insert(term.to_string(), score / max_score);
    }
    expanded
}
