//! BM25 scoring and top-K retrieval.
//!
//! BM25 is computed in its sparse dot-product form: the document side is a
//! sparse vector whose component for term `t` is
//!
//! ```text
//! w(t, d) = IDF(t) * cnt(t, d) * (k + 1) / (cnt(t, d) + k * (1 - b + b * m / m_avg))
//! ```
//!
//! with `m` the document token count and `m_avg` its collection mean, and
//! the query side assigns each distinct term `multiplicity x weight`. A
//! query-document score is the dot product of the two vectors.

use super::index::InvertedIndex;
use super::{Bm25Params, LexicalError, QuerySpec};

impl InvertedIndex {
    /// Smoothed inverse document frequency:
    /// `ln(1 + (N - df + 0.5) / (df + 0.5))`. Strictly positive for every
    /// indexed term, including terms present in all documents.
    pub fn idf(&self, term: &str) -> f64 {
        let n = self.n_docs() as f64;
        let df = self.doc_freq(term) as f64;
        (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
    }

    fn weight_from_count(&self, idf: f64, count: u32, doc_len: u32, params: &Bm25Params) -> f64 {
        if count == 0 {
            return 0.0;
        }
        let cnt = count as f64;
        let norm = 1.0 - params.b + params.b * (doc_len as f64 / self.avg_doc_len());
        // tf quotient first: for cnt = 1 and m = m_avg it is exactly 1.0,
        // so the weight collapses to IDF with no rounding.
        let tf = (cnt * (params.k + 1.0)) / (cnt + params.k * norm);
        idf * tf
    }

    /// The document-vector component for `term`: 0 when the term does not
    /// occur in the document, and exactly `IDF(term)` when `cnt = 1` and
    /// the document has average length.
    pub fn bm25_term_weight(
        &self,
        term: &str,
        doc_ordinal: u32,
        params: &Bm25Params,
    ) -> Result<f64, LexicalError> {
        params.validate()?;
        let doc_len = self
            .doc_len(doc_ordinal)
            .ok_or(LexicalError::UnknownDoc(doc_ordinal))?;
        let count = self.term_count_in(term, doc_ordinal);
        Ok(self.weight_from_count(self.idf(term), count, doc_len, params))
    }

    /// Query-document BM25: the sum over query terms (with multiplicity) of
    /// `weight(term) * bm25_term_weight(term, doc)`, i.e. the sparse dot product
    /// of the query and document vectors.
    pub fn bm25_score(
        &self,
        query: &QuerySpec,
        doc_ordinal: u32,
        params: &Bm25Params,
    ) -> Result<f64, LexicalError> {
        params.validate()?;
        let doc_len = self
            .doc_len(doc_ordinal)
            .ok_or(LexicalError::UnknownDoc(doc_ordinal))?;
        let mut total = 0.0;
        for (term, weight) in query.effective_weights() {
            let count = self.term_count_in(term, doc_ordinal);
            total += weight * self.weight_from_count(self.idf(term), count, doc_len, params);
        }
        Ok(total)
    }

    /// Top-K documents by BM25, descending, ties broken by ascending doc id.
    /// Documents matching no query term (score 0) are excluded.
    ///
    /// Accumulation is postings-driven but iterates query terms in sorted
    /// order, so the scores are bit-identical to [`InvertedIndex::bm25_score`].
    pub fn search(
        &self,
        query: &QuerySpec,
        params: &Bm25Params,
        k: usize,
    ) -> Result<Vec<(String, f64)>, LexicalError> {
        params.validate()?;
        let mut acc: std::collections::HashMap<u32, f64> = std::collections::HashMap::new();
        for (term, weight) in query.effective_weights() {
            let Some(postings) = self.postings(term) else {
                continue;
            };
            let idf = self.idf(term);
            for posting in postings {
                let doc_len = self.doc_len(posting.doc).expect("posting ordinal in range");
                let w = self.weight_from_count(idf, posting.count, doc_len, params);
                *acc.entry(posting.doc).or_insert(0.0) += weight * w;
            }
        }
        let mut hits: Vec<(String, f64)> = acc
            .into_iter()
            .filter(|&(_, score)| score > 0.0)
            .map(|(ordinal, score)| {
                (
                    self.doc_id(ordinal).expect("ordinal in range").to_string(),
                    score,
                )
            })
            .collect();
        hits.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        hits.truncate(k);
        Ok(hits)
    }
}
