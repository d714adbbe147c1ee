//! Retrieval-ensemble toolkit.
//!
//! `runfuse` combines heterogeneous retrieval runs into a single ranking via
//! reciprocal rank fusion (flat, hierarchical, and weighted hierarchical),
//! and ships the systems that produce those runs plus the machinery to
//! measure them:
//!
//! * [`io`]: TREC run / qrels / topics-XML / JSONL-corpus parsing and writing
//! * [`lexical`]: inverted index, BM25 scoring, query construction,
//!   pseudo- and true relevance-feedback expansion
//! * [`dense`]: brute-force exact dot-product retrieval over precomputed
//!   vectors, and the λ-weighted hybrid dense+BM25 similarity
//! * [`fusion`]: RRF over run pools, the rescore-top-N pipeline step
//! * [`ltr`]: a linear scorer with softmax ranking loss, its gradient,
//!   negative sampling, and a small seeded trainer
//! * [`eval`]: nDCG@K / P@K / MAP / Recall@K, residual-collection
//!   filtering, and paired t-tests
//!
//! Every operation is deterministic: ties break by ascending document id,
//! floating-point accumulation happens in a canonical order, and all
//! randomness is seeded.

pub mod dense;
pub mod eval;
pub mod fusion;
pub mod io;
pub mod lexical;
pub mod ltr;

pub use dense::{DenseStore, HybridParams};
pub use eval::{Cutoffs, EvalResult, Evaluation, Qrels, TTestReport};
pub use fusion::{FusionParams, RunPool};
pub use io::{Doc, Run, RunEntry, Topic};
pub use lexical::{Bm25Params, FieldSource, InvertedIndex, QuerySpec, TopicField};
pub use ltr::{Candidate, LinearScorer, TrainingExample};
