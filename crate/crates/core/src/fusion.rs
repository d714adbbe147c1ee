//! Reciprocal rank fusion over heterogeneous run pools.
//!
//! A document appearing at rank `r` in a run contributes `1 / (k + r)` to
//! its fused score; documents absent from every run never appear in the
//! output. Fusion needs only ranks, so runs with incompatible score scales
//! combine cleanly.
//!
//! Three variants build on that primitive:
//!
//! * [`rrf_fuse`]: flat fusion of a run list;
//! * [`hierarchical_fuse`]: fuse each system's pool first, then fuse the
//!   per-pool runs, so no system dominates by sheer run count;
//! * [`weighted_hierarchical_fuse`]: the hierarchical variant with a
//!   per-pool weight `w_S` on the outer sum. The stock heuristic
//!   ([`default_weights`]) gives weight 2 to pools built with prior
//!   relevance judgments and 1 to everything else.
//!
//! All variants are permutation invariant in their inputs: per-document
//! contributions are accumulated in a canonical order before summing, so
//! reordering runs or pools changes nothing, not even the last bit.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::io::Run;

/// Errors from fusion and rescoring.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum FusionError {
    #[error("cannot fuse an empty run list")]
    EmptyRunList,
    #[error("pool `{0}` has no runs")]
    EmptyPool(String),
    #[error("duplicate system name `{0}`")]
    DuplicateSystem(String),
    #[error("pool `{system}` has non-positive weight {weight}")]
    NonPositiveWeight { system: String, weight: f64 },
    #[error("fusion constant k must be positive, got {0}")]
    BadK(f64),
    #[error("topic {topic}: scorer undefined for doc `{doc_id}`")]
    ScorerUndefined { topic: u32, doc_id: String },
    #[error("rescore depth must be >= 1")]
    BadDepth,
}

/// The RRF constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusionParams {
    pub k: f64,
}

impl Default for FusionParams {
    fn default() -> Self {
        // k = 60 dampens the impact of a single system ranking an outlier
        // document very high.
        FusionParams { k: 60.0 }
    }
}

impl FusionParams {
    fn validate(&self) -> Result<(), FusionError> {
        if !(self.k.is_finite() && self.k > 0.0) {
            return Err(FusionError::BadK(self.k));
        }
        Ok(())
    }
}

/// A named group of runs produced by one system, fused internally before
/// cross-system fusion. `weight` is the pool's share in weighted fusion.
#[derive(Debug, Clone, PartialEq)]
pub struct RunPool {
    pub system_name: String,
    pub runs: Vec<Run>,
    pub weight: f64,
    pub uses_relevance_judgments: bool,
}

impl RunPool {
    pub fn new(system_name: impl Into<String>, runs: Vec<Run>) -> Self {
        RunPool {
            system_name: system_name.into(),
            runs,
            weight: 1.0,
            uses_relevance_judgments: false,
        }
    }
}

/// One pool's entry in a JSON pool-configuration file. Omitted weights are
/// filled by the [`default_weights`] heuristic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolConfig {
    pub system_name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<f64>,
    #[serde(default)]
    pub uses_relevance_judgments: bool,
    pub run_files: Vec<String>,
}

/// The heuristic pool weight: 2 for systems that relied on prior relevance
/// judgments, 1 for everything else.
pub fn default_weight(uses_relevance_judgments: bool) -> f64 {
    if uses_relevance_judgments {
        2.0
    } else {
        1.0
    }
}

/// Apply the weight heuristic to every pool.
pub fn default_weights(mut pools: Vec<RunPool>) -> Vec<RunPool> {
    for pool in &mut pools {
        pool.weight = default_weight(pool.uses_relevance_judgments);
    }
    pools
}

/// Fuse a list of runs with flat RRF: per topic, each document's score is
/// the sum of `1 / (k + rank)` over the runs that rank it. Output entries
/// are sorted by score descending (ties by ascending doc id), ranks
/// reassigned 1..n, topics taken as the union over all runs.
pub fn rrf_fuse(runs: &[Run], params: &FusionParams, tag: &str) -> Result<Run, FusionError> {
    params.validate()?;
    if runs.is_empty() {
        return Err(FusionError::EmptyRunList);
    }
    let mut contributions = Contributions::new();
    for run in runs {
        contributions.add_run(run, params.k, 1.0);
    }
    Ok(contributions.into_run(tag))
}

/// Fuse one pool's runs. Identical to [`rrf_fuse`] with the pool's system
/// name as the output tag.
pub fn pool_fuse(pool: &RunPool, params: &FusionParams) -> Result<Run, FusionError> {
    if pool.runs.is_empty() {
        return Err(FusionError::EmptyPool(pool.system_name.clone()));
    }
    rrf_fuse(&pool.runs, params, &pool.system_name)
}

/// Hierarchical RRF: fuse each pool, then fuse the per-pool runs.
pub fn hierarchical_fuse(
    pools: &[RunPool],
    params: &FusionParams,
    tag: &str,
) -> Result<Run, FusionError> {
    let pool_runs = fuse_pools(pools, params)?;
    rrf_fuse(&pool_runs, params, tag)
}

/// Weighted hierarchical RRF: fuse each pool, then score each document as
/// the sum of `w_S / (k + rank)` over the per-pool runs that rank it. With
/// all weights 1 this is exactly [`hierarchical_fuse`].
pub fn weighted_hierarchical_fuse(
    pools: &[RunPool],
    params: &FusionParams,
    tag: &str,
) -> Result<Run, FusionError> {
    for pool in pools {
        if !(pool.weight.is_finite() && pool.weight > 0.0) {
            return Err(FusionError::NonPositiveWeight {
                system: pool.system_name.clone(),
                weight: pool.weight,
            });
        }
    }
    let pool_runs = fuse_pools(pools, params)?;
    let mut contributions = Contributions::new();
    for (run, pool) in pool_runs.iter().zip(pools) {
        contributions.add_run(run, params.k, pool.weight);
    }
    Ok(contributions.into_run(tag))
}

fn fuse_pools(pools: &[RunPool], params: &FusionParams) -> Result<Vec<Run>, FusionError> {
    params.validate()?;
    if pools.is_empty() {
        return Err(FusionError::EmptyRunList);
    }
    let mut names = std::collections::HashSet::new();
    for pool in pools {
        if !names.insert(pool.system_name.as_str()) {
            return Err(FusionError::DuplicateSystem(pool.system_name.clone()));
        }
    }
    pools.iter().map(|p| pool_fuse(p, params)).collect()
}

/// Re-rank the top `n` entries of each topic with an external scorer and
/// drop everything below. Output scores are the scorer's outputs; ties
/// break by ascending doc id; ranks are reassigned.
///
/// The scorer returns `None` where it is undefined, which is an error for
/// any document inside the top `n`.
pub fn rescore_top<F>(run: &Run, n: usize, mut scorer: F) -> Result<Run, FusionError>
where
    F: FnMut(u32, &str) -> Option<f64>,
{
    if n == 0 {
        return Err(FusionError::BadDepth);
    }
    let mut out = Run::new(run.tag.clone());
    for (&topic, entries) in &run.entries {
        let mut rescored: Vec<(String, f64)> = Vec::with_capacity(n.min(entries.len()));
        for entry in entries.iter().take(n) {
            let score =
                scorer(topic, &entry.doc_id).ok_or_else(|| FusionError::ScorerUndefined {
                    topic,
                    doc_id: entry.doc_id.clone(),
                })?;
            rescored.push((entry.doc_id.clone(), score));
        }
        rescored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        out.set_topic(topic, rescored);
    }
    Ok(out)
}

/// Per-topic, per-document reciprocal-rank contributions awaiting summation.
///
/// Contributions are sorted before summing so the fused scores do not
/// depend on input order (bit-for-bit).
struct Contributions {
    per_topic: BTreeMap<u32, BTreeMap<String, Vec<f64>>>,
}

impl Contributions {
    fn new() -> Self {
        Contributions {
            per_topic: BTreeMap::new(),
        }
    }

    fn add_run(&mut self, run: &Run, k: f64, weight: f64) {
        for (&topic, entries) in &run.entries {
            let docs = self.per_topic.entry(topic).or_default();
            for entry in entries {
                docs.entry(entry.doc_id.clone())
                    .or_default()
                    .push(weight / (k + entry.rank as f64));
            }
        }
    }

    fn into_run(self, tag: &str) -> Run {
        let mut run = Run::new(tag);
        for (topic, docs) in self.per_topic {
            let mut scored: Vec<(String, f64)> = docs
                .into_iter()
                .map(|(doc_id, mut contribs)| {
                    contribs.sort_by(f64::total_cmp);
                    (doc_id, contribs.iter().sum::<f64>())
                })
                .collect();
            scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
            run.set_topic(topic, scored);
        }
        run
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_of(tag: &str, topic: u32, docs: &[&str]) -> Run {
        let scored: Vec<(String, f64)> = docs
            .iter()
            .enumerate()
            .map(|(i, d)| (d.to_string(), (docs.len() - i) as f64))
            .collect();
        Run::from_scored(tag, [(topic, scored)])
    }

    fn doc_order(run: &Run, topic: u32) -> Vec<&str> {
        run.entries[&topic]
            .iter()
            .map(|e| e.doc_id.as_str())
            .collect()
    }

    #[test]
    fn single_run_single_doc() {
        let run = run_of("a", 1, &["d1"]);
        let fused = rrf_fuse(&[run], &FusionParams::default(), "rrf").unwrap();
        let entry = &fused.entries[&1][0];
        assert!((entry.score - 1.0 / 61.0).abs() < 1e-15);
        assert_eq!(entry.rank, 1);
    }

    #[test]
    fn worked_two_run_example() {
        let a = run_of("a", 1, &["d1", "d2", "d3"]);
        let b = run_of("b", 1, &["d2", "d3"]);
        let fused = rrf_fuse(&[a, b], &FusionParams::default(), "rrf").unwrap();
        assert_eq!(doc_order(&fused, 1), vec!["d2", "d3", "d1"]);
        let scores: Vec<f64> = fused.entries[&1].iter().map(|e| e.score).collect();
        assert!((scores[0] - (1.0 / 62.0 + 1.0 / 61.0)).abs() < 1e-15);
        assert!((scores[1] - (1.0 / 63.0 + 1.0 / 62.0)).abs() < 1e-15);
        assert!((scores[2] - 1.0 / 61.0).abs() < 1e-15);
    }

    #[test]
    fn empty_run_list_rejected() {
        assert_eq!(
            rrf_fuse(&[], &FusionParams::default(), "x").unwrap_err(),
            FusionError::EmptyRunList
        );
    }

    #[test]
    fn topics_union_across_runs() {
        let a = run_of("a", 1, &["d1"]);
        let b = run_of("b", 2, &["d2"]);
        let fused = rrf_fuse(&[a, b], &FusionParams::default(), "rrf").unwrap();
        assert_eq!(fused.topics().collect::<Vec<_>>(), vec![1, 2]);
    }

    #[test]
    fn permutation_invariance_is_exact() {
        let a = run_of("a", 1, &["d1", "d2", "d3", "d4"]);
        let b = run_of("b", 1, &["d4", "d2"]);
        let c = run_of("c", 1, &["d3", "d1", "d2"]);
        let p = &FusionParams::default();
        let fwd = rrf_fuse(&[a.clone(), b.clone(), c.clone()], p, "t").unwrap();
        let rev = rrf_fuse(&[c, b, a], p, "t").unwrap();
        assert_eq!(fwd, rev);
    }

    #[test]
    fn pool_fuse_of_singleton_preserves_order() {
        let pool = RunPool::new("sys", vec![run_of("r", 1, &["x", "y", "z"])]);
        let fused = pool_fuse(&pool, &FusionParams::default()).unwrap();
        assert_eq!(fused.tag, "sys");
        assert_eq!(doc_order(&fused, 1), vec!["x", "y", "z"]);
        assert!((fused.entries[&1][1].score - 1.0 / 62.0).abs() < 1e-15);
    }

    #[test]
    fn pool_of_identical_runs_doubles_scores() {
        let r = run_of("r", 1, &["x", "y"]);
        let single = pool_fuse(
            &RunPool::new("s", vec![r.clone()]),
            &FusionParams::default(),
        )
        .unwrap();
        let double = pool_fuse(
            &RunPool::new("s", vec![r.clone(), r]),
            &FusionParams::default(),
        )
        .unwrap();
        assert_eq!(doc_order(&double, 1), doc_order(&single, 1));
        for (a, b) in double.entries[&1].iter().zip(&single.entries[&1]) {
            assert_eq!(a.score, 2.0 * b.score);
        }
    }

    #[test]
    fn hierarchical_one_pool_equals_pool_fuse_order() {
        let pool = RunPool::new(
            "s",
            vec![run_of("r1", 1, &["a", "b"]), run_of("r2", 1, &["b", "c"])],
        );
        let inner = pool_fuse(&pool, &FusionParams::default()).unwrap();
        let outer = hierarchical_fuse(&[pool], &FusionParams::default(), "h").unwrap();
        assert_eq!(doc_order(&outer, 1), doc_order(&inner, 1));
    }

    #[test]
    fn duplicate_system_names_rejected() {
        let pools = vec![
            RunPool::new("s", vec![run_of("r", 1, &["a"])]),
            RunPool::new("s", vec![run_of("r", 1, &["b"])]),
        ];
        assert_eq!(
            hierarchical_fuse(&pools, &FusionParams::default(), "h").unwrap_err(),
            FusionError::DuplicateSystem("s".to_string())
        );
    }

    #[test]
    fn weighted_reduces_to_hierarchical_at_weight_one() {
        let pools = vec![
            RunPool::new("s1", vec![run_of("r1", 1, &["a", "b", "c"])]),
            RunPool::new("s2", vec![run_of("r2", 1, &["c", "a"])]),
        ];
        let h = hierarchical_fuse(&pools, &FusionParams::default(), "t").unwrap();
        let w = weighted_hierarchical_fuse(&pools, &FusionParams::default(), "t").unwrap();
        assert_eq!(h, w);
    }

    #[test]
    fn heavier_pool_wins_rank_one() {
        let mut p1 = RunPool::new("s1", vec![run_of("r1", 1, &["x"])]);
        p1.weight = 2.0;
        let p2 = RunPool::new("s2", vec![run_of("r2", 1, &["y"])]);
        let fused = weighted_hierarchical_fuse(&[p1, p2], &FusionParams::default(), "t").unwrap();
        assert_eq!(doc_order(&fused, 1), vec!["x", "y"]);
        assert!((fused.entries[&1][0].score - 2.0 / 61.0).abs() < 1e-15);
        assert!((fused.entries[&1][1].score - 1.0 / 61.0).abs() < 1e-15);
    }

    #[test]
    fn non_positive_weight_rejected() {
        let mut pool = RunPool::new("s", vec![run_of("r", 1, &["a"])]);
        pool.weight = 0.0;
        assert!(matches!(
            weighted_hierarchical_fuse(&[pool], &FusionParams::default(), "t"),
            Err(FusionError::NonPositiveWeight { .. })
        ));
    }

    #[test]
    fn weight_scaling_preserves_order() {
        let mut p1 = RunPool::new("s1", vec![run_of("r1", 1, &["a", "b"])]);
        p1.weight = 2.0;
        let mut p2 = RunPool::new("s2", vec![run_of("r2", 1, &["b", "c"])]);
        p2.weight = 1.0;
        let base =
            weighted_hierarchical_fuse(&[p1.clone(), p2.clone()], &FusionParams::default(), "t")
                .unwrap();
        for c in [0.5, 3.0, 17.0] {
            let mut q1 = p1.clone();
            let mut q2 = p2.clone();
            q1.weight *= c;
            q2.weight *= c;
            let scaled =
                weighted_hierarchical_fuse(&[q1, q2], &FusionParams::default(), "t").unwrap();
            assert_eq!(doc_order(&scaled, 1), doc_order(&base, 1));
            for (s, b) in scaled.entries[&1].iter().zip(&base.entries[&1]) {
                assert!((s.score - c * b.score).abs() < 1e-12 * c.max(1.0));
            }
        }
    }

    #[test]
    fn default_weights_follow_the_judgment_flag() {
        let mut with = RunPool::new("feedback", vec![run_of("r", 1, &["a"])]);
        with.uses_relevance_judgments = true;
        let without = RunPool::new("lexical", vec![run_of("r", 1, &["a"])]);
        let pools = default_weights(vec![with, without]);
        assert_eq!(pools[0].weight, 2.0);
        assert_eq!(pools[1].weight, 1.0);
        assert!(default_weights(vec![]).is_empty());
    }

    #[test]
    fn fused_scores_bounded_by_weight_sum_over_k_plus_one() {
        let mut p1 = RunPool::new("s1", vec![run_of("r1", 1, &["a", "b"])]);
        p1.weight = 2.0;
        let mut p2 = RunPool::new("s2", vec![run_of("r2", 1, &["a"])]);
        p2.weight = 1.0;
        let fused = weighted_hierarchical_fuse(&[p1, p2], &FusionParams::default(), "t").unwrap();
        let bound = 3.0 / 61.0;
        for entry in &fused.entries[&1] {
            assert!(entry.score > 0.0);
            assert!(entry.score <= bound);
        }
    }

    #[test]
    fn rescore_top_reorders_and_drops() {
        let run = run_of("r", 1, &["a", "b", "c", "d"]);
        let scores: std::collections::HashMap<&str, f64> =
            [("a", 0.1), ("b", 0.9), ("c", 0.5)].into_iter().collect();
        let rescored = rescore_top(&run, 3, |_, doc| scores.get(doc).copied()).unwrap();
        assert_eq!(doc_order(&rescored, 1), vec!["b", "c", "a"]);
        assert_eq!(rescored.entries[&1][0].score, 0.9);
        assert_eq!(rescored.entries[&1].len(), 3, "doc below n dropped");
    }

    #[test]
    fn rescore_with_existing_scores_is_idempotent() {
        let run = run_of("r", 1, &["a", "b", "c"]);
        let rescored = rescore_top(&run, 10, |topic, doc| {
            run.entries[&topic]
                .iter()
                .find(|e| e.doc_id == doc)
                .map(|e| e.score)
        })
        .unwrap();
        assert_eq!(rescored, run);
    }

    #[test]
    fn constant_scorer_sorts_by_doc_id() {
        let run = run_of("r", 1, &["c", "a", "b"]);
        let rescored = rescore_top(&run, 10, |_, _| Some(1.0)).unwrap();
        assert_eq!(doc_order(&rescored, 1), vec!["a", "b", "c"]);
    }

    #[test]
    fn rescore_undefined_doc_is_an_error() {
        let run = run_of("r", 1, &["a", "b"]);
        let err = rescore_top(&run, 2, |_, doc| (doc == "a").then_some(1.0)).unwrap_err();
        assert_eq!(
            err,
            FusionError::ScorerUndefined {
                topic: 1,
                doc_id: "b".to_string()
            }
        );
    }

    #[test]
    fn hierarchical_matches_a_two_stage_hand_oracle() {
        // three pools x two runs over a handful of docs
        let pools = vec![
            RunPool::new(
                "s1",
                vec![
                    run_of("a1", 1, &["d1", "d2", "d5"]),
                    run_of("a2", 1, &["d2", "d3"]),
                ],
            ),
            RunPool::new(
                "s2",
                vec![
                    run_of("b1", 1, &["d4", "d1"]),
                    run_of("b2", 1, &["d1", "d4", "d2"]),
                ],
            ),
            RunPool::new(
                "s3",
                vec![
                    run_of("c1", 1, &["d5"]),
                    run_of("c2", 1, &["d5", "d3", "d6"]),
                ],
            ),
        ];
        let k = 60.0;
        // stage one, literal: per pool, per doc, sum reciprocal ranks and
        // re-rank by score then doc id
        let mut stage_one: Vec<Vec<(String, f64)>> = Vec::new();
        for pool in &pools {
            let mut scores: BTreeMap<String, f64> = BTreeMap::new();
            for run in &pool.runs {
                for e in &run.entries[&1] {
                    *scores.entry(e.doc_id.clone()).or_insert(0.0) += 1.0 / (k + e.rank as f64);
                }
            }
            let mut list: Vec<(String, f64)> = scores.into_iter().collect();
            list.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
            stage_one.push(list);
        }
        // stage two, literal: reciprocal ranks over the per-pool lists
        let mut scores: BTreeMap<String, f64> = BTreeMap::new();
        for list in &stage_one {
            for (rank0, (doc, _)) in list.iter().enumerate() {
                *scores.entry(doc.clone()).or_insert(0.0) += 1.0 / (k + (rank0 + 1) as f64);
            }
        }
        let mut expected: Vec<String> = scores.keys().cloned().collect();
        expected.sort_by(|a, b| scores[b].total_cmp(&scores[a]).then_with(|| a.cmp(b)));

        let fused = hierarchical_fuse(&pools, &FusionParams { k }, "h").unwrap();
        assert_eq!(
            doc_order(&fused, 1),
            expected.iter().map(String::as_str).collect::<Vec<_>>()
        );
        for entry in &fused.entries[&1] {
            assert!((entry.score - scores[&entry.doc_id]).abs() < 1e-12);
        }
    }

    #[test]
    fn rank_only_dependence() {
        // Replacing scores with any strictly decreasing sequence changes
        // nothing: fusion reads ranks alone.
        let a1 = run_of("a", 1, &["d1", "d2", "d3"]);
        let mut a2 = a1.clone();
        for (i, e) in a2.entries.get_mut(&1).unwrap().iter_mut().enumerate() {
            e.score = 1000.0 / (i as f64 + 1.0);
        }
        let b = run_of("b", 1, &["d3", "d1"]);
        let p = &FusionParams::default();
        let f1 = rrf_fuse(&[a1, b.clone()], p, "t").unwrap();
        let f2 = rrf_fuse(&[a2, b], p, "t").unwrap();
        assert_eq!(f1, f2);
    }
}
