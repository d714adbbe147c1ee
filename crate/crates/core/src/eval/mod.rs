//! TREC-style evaluation: nDCG@K, P@K, MAP, Recall@K, residual-collection
//! filtering, and paired t-tests.
//!
//! Binary metrics (P, AP, Recall) treat grade >= 1 as relevant; nDCG uses
//! linear gain `grade / log2(rank + 1)`. Unjudged retrieved documents count
//! as non-relevant. Topics without a relevant document are excluded from
//! means rather than scored zero, matching standard TREC evaluation
//! semantics; exclusion counts are reported.

mod metrics;
mod ttest;

pub use metrics::{
    average_precision, evaluate, metric_per_topic, ndcg_at_k, precision_at_k, recall_at_k,
    residual_filter, Cutoffs, EvalResult, Evaluation, Metric,
};
pub use ttest::{paired_t_test, TTestReport};

pub use crate::io::Qrels;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("no evaluable topics (run and judged-relevant topics are disjoint)")]
    NoEvaluableTopics,
    #[error("cutoff K must be >= 1")]
    BadCutoff,
    #[error("per-topic key sets differ: only in a: {only_a:?}, only in b: {only_b:?}")]
    KeyMismatch { only_a: Vec<u32>, only_b: Vec<u32> },
    #[error("unknown metric `{0}` (expected ndcg@K, p@K, map, or recall@K)")]
    UnknownMetric(String),
}
