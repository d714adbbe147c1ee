//! Per-topic metric computation and the batch evaluator.

use std::collections::BTreeMap;
use std::str::FromStr;

use serde::Serialize;

use super::EvalError;
use crate::io::{Qrels, Run, RunEntry};

fn topic_entries(run: &Run, topic: u32) -> &[RunEntry] {
    run.entries.get(&topic).map(Vec::as_slice).unwrap_or(&[])
}

fn is_relevant(qrels: &Qrels, topic: u32, doc_id: &str) -> bool {
    qrels.grade(topic, doc_id).unwrap_or(0) >= 1
}

/// Fraction of the top `k` retrieved documents that are relevant. The
/// denominator is `k` even when fewer documents were retrieved; a topic
/// absent from the run scores 0.
pub fn precision_at_k(run: &Run, qrels: &Qrels, k: usize, topic: u32) -> f64 {
    debug_assert!(k >= 1);
    let hits = topic_entries(run, topic)
        .iter()
        .take(k)
        .filter(|e| is_relevant(qrels, topic, &e.doc_id))
        .count();
    hits as f64 / k as f64
}

/// Mean of precision-at-rank over the relevant retrieved documents, divided
/// by the total number of relevant documents R. `None` when R = 0 (the
/// topic is excluded from evaluation).
pub fn average_precision(run: &Run, qrels: &Qrels, topic: u32) -> Option<f64> {
    let total_relevant = qrels.relevant_count(topic);
    if total_relevant == 0 {
        return None;
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (i, entry) in topic_entries(run, topic).iter().enumerate() {
        if is_relevant(qrels, topic, &entry.doc_id) {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    Some(sum / total_relevant as f64)
}

/// Normalized discounted cumulative gain at `k` with linear gain:
/// `DCG@k = sum grade(d_i) / log2(i + 1)`, normalized by the ideal DCG over
/// the topic's judged grades. `None` when the ideal DCG is 0.
pub fn ndcg_at_k(run: &Run, qrels: &Qrels, k: usize, topic: u32) -> Option<f64> {
    debug_assert!(k >= 1);
    let ideal_grades = qrels.grades_descending(topic);
    let idcg: f64 = ideal_grades
        .iter()
        .take(k)
        .enumerate()
        .map(|(i, &g)| g as f64 / ((i + 2) as f64).log2())
        .sum();
    if idcg == 0.0 {
        return None;
    }
    let dcg: f64 = topic_entries(run, topic)
        .iter()
        .take(k)
        .enumerate()
        .map(|(i, e)| {
            let grade = qrels.grade(topic, &e.doc_id).unwrap_or(0).max(0);
            grade as f64 / ((i + 2) as f64).log2()
        })
        .sum();
    Some(dcg / idcg)
}

/// Fraction of the topic's relevant documents found in the top `k`.
/// `None` when the topic has no relevant documents.
pub fn recall_at_k(run: &Run, qrels: &Qrels, k: usize, topic: u32) -> Option<f64> {
    debug_assert!(k >= 1);
    let total_relevant = qrels.relevant_count(topic);
    if total_relevant == 0 {
        return None;
    }
    let hits = topic_entries(run, topic)
        .iter()
        .take(k)
        .filter(|e| is_relevant(qrels, topic, &e.doc_id))
        .count();
    Some(hits as f64 / total_relevant as f64)
}

/// The metric cutoffs reported by [`evaluate`], defaulting to the usual
/// reporting row: nDCG@20, P@20, MAP, Recall@1000.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Cutoffs {
    pub ndcg_k: usize,
    pub precision_k: usize,
    pub recall_k: usize,
}

impl Default for Cutoffs {
    fn default() -> Self {
        Cutoffs {
            ndcg_k: 20,
            precision_k: 20,
            recall_k: 1000,
        }
    }
}

/// One metric's per-topic values over the evaluable topics, plus their mean.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalResult {
    pub metric: String,
    pub per_topic: BTreeMap<u32, f64>,
    pub mean: f64,
}

/// The full evaluation of a run: one [`EvalResult`] per metric plus the
/// counts of topics excluded from the means.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Evaluation {
    pub results: Vec<EvalResult>,
    /// Qrels topics with no relevant document.
    pub skipped_no_relevant: usize,
    /// Judged-relevant topics for which the run retrieved nothing.
    pub skipped_unretrieved: usize,
}

impl Evaluation {
    pub fn result(&self, metric: &str) -> Option<&EvalResult> {
        self.results.iter().find(|r| r.metric == metric)
    }

    /// Render the tab-separated report: per-topic `metric topic value`
    /// lines followed by a `metric all mean` summary line per metric.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for result in &self.results {
            for (topic, value) in &result.per_topic {
                out.push_str(&format!("{}\t{topic}\t{value:.4}\n", result.metric));
            }
            out.push_str(&format!("{}\tall\t{:.4}\n", result.metric, result.mean));
        }
        out
    }
}

/// A metric selector, parseable from strings like `ndcg@20`, `p@20`,
/// `map`, `recall@1000`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Ndcg(usize),
    Precision(usize),
    Map,
    Recall(usize),
}

impl Metric {
    pub fn name(&self) -> String {
        match self {
            Metric::Ndcg(k) => format!("ndcg@{k}"),
            Metric::Precision(k) => format!("p@{k}"),
            Metric::Map => "map".to_string(),
            Metric::Recall(k) => format!("recall@{k}"),
        }
    }

    fn compute(&self, run: &Run, qrels: &Qrels, topic: u32) -> Option<f64> {
        match *self {
            Metric::Ndcg(k) => ndcg_at_k(run, qrels, k, topic),
            Metric::Precision(k) => Some(precision_at_k(run, qrels, k, topic)),
            Metric::Map => average_precision(run, qrels, topic),
            Metric::Recall(k) => recall_at_k(run, qrels, k, topic),
        }
    }
}

impl FromStr for Metric {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.to_ascii_lowercase();
        if lower == "map" {
            return Ok(Metric::Map);
        }
        let (name, k) = lower
            .split_once('@')
            .ok_or_else(|| EvalError::UnknownMetric(s.to_string()))?;
        let k: usize = k
            .parse()
            .ok()
            .filter(|&k| k >= 1)
            .ok_or_else(|| EvalError::UnknownMetric(s.to_string()))?;
        match name {
            "ndcg" => Ok(Metric::Ndcg(k)),
            "p" | "precision" => Ok(Metric::Precision(k)),
            "recall" => Ok(Metric::Recall(k)),
            _ => Err(EvalError::UnknownMetric(s.to_string())),
        }
    }
}

/// The evaluable topics: judged with at least one relevant document, and
/// retrieved (at least one entry) by the run.
fn evaluable_topics(run: &Run, qrels: &Qrels) -> (Vec<u32>, usize, usize) {
    let mut evaluable = Vec::new();
    let mut skipped_no_relevant = 0;
    let mut skipped_unretrieved = 0;
    for topic in qrels.topics() {
        if qrels.relevant_count(topic) == 0 {
            skipped_no_relevant += 1;
        } else if topic_entries(run, topic).is_empty() {
            skipped_unretrieved += 1;
        } else {
            evaluable.push(topic);
        }
    }
    (evaluable, skipped_no_relevant, skipped_unretrieved)
}

/// Per-topic values of one metric over the evaluable topics.
pub fn metric_per_topic(
    run: &Run,
    qrels: &Qrels,
    metric: Metric,
) -> Result<BTreeMap<u32, f64>, EvalError> {
    let (topics, _, _) = evaluable_topics(run, qrels);
    if topics.is_empty() {
        return Err(EvalError::NoEvaluableTopics);
    }
    Ok(topics
        .into_iter()
        .filter_map(|t| metric.compute(run, qrels, t).map(|v| (t, v)))
        .collect())
}

/// Evaluate a run against qrels with the standard four-metric row.
pub fn evaluate(run: &Run, qrels: &Qrels, cutoffs: &Cutoffs) -> Result<Evaluation, EvalError> {
    if cutoffs.ndcg_k == 0 || cutoffs.precision_k == 0 || cutoffs.recall_k == 0 {
        return Err(EvalError::BadCutoff);
    }
    let (topics, skipped_no_relevant, skipped_unretrieved) = evaluable_topics(run, qrels);
    if topics.is_empty() {
        return Err(EvalError::NoEvaluableTopics);
    }
    let metrics = [
        Metric::Ndcg(cutoffs.ndcg_k),
        Metric::Precision(cutoffs.precision_k),
        Metric::Map,
        Metric::Recall(cutoffs.recall_k),
    ];
    let results = metrics
        .iter()
        .map(|metric| {
            let per_topic: BTreeMap<u32, f64> = topics
                .iter()
                .filter_map(|&t| metric.compute(run, qrels, t).map(|v| (t, v)))
                .collect();
            let mean = per_topic.values().sum::<f64>() / per_topic.len() as f64;
            EvalResult {
                metric: metric.name(),
                per_topic,
                mean,
            }
        })
        .collect();
    Ok(Evaluation {
        results,
        skipped_no_relevant,
        skipped_unretrieved,
    })
}

/// Residual-collection filtering: drop from every topic all documents
/// judged in `prior_qrels` for that topic (any grade, including 0) and
/// reassign ranks. Scores are preserved; topics are kept even when the
/// filter empties them.
pub fn residual_filter(run: &Run, prior_qrels: &Qrels) -> Run {
    let mut out = Run::new(run.tag.clone());
    for (&topic, entries) in &run.entries {
        let kept: Vec<(String, f64)> = entries
            .iter()
            .filter(|e| !prior_qrels.is_judged(topic, &e.doc_id))
            .map(|e| (e.doc_id.clone(), e.score))
            .collect();
        out.set_topic(topic, kept);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn run_of(topic: u32, docs: &[&str]) -> Run {
        let scored: Vec<(String, f64)> = docs
            .iter()
            .enumerate()
            .map(|(i, d)| (d.to_string(), (docs.len() - i) as f64))
            .collect();
        Run::from_scored("t", [(topic, scored)])
    }

    fn qrels_of(topic: u32, graded: &[(&str, i64)]) -> Qrels {
        let mut qrels = Qrels::new();
        for &(doc, grade) in graded {
            qrels.insert(topic, doc, grade);
        }
        qrels
    }

    #[test]
    fn precision_fixtures() {
        // 10 relevant docs in the top 20
        let docs: Vec<String> = (0..20).map(|i| format!("d{i:02}")).collect();
        let run = run_of(1, &docs.iter().map(String::as_str).collect::<Vec<_>>());
        let graded: Vec<(&str, i64)> = docs.iter().step_by(2).map(|d| (d.as_str(), 1)).collect();
        let qrels = qrels_of(1, &graded);
        assert_eq!(precision_at_k(&run, &qrels, 20, 1), 0.5);

        // empty result list
        let empty = Run::new("t");
        assert_eq!(precision_at_k(&empty, &qrels, 20, 1), 0.0);

        // all of top-k relevant
        let run3 = run_of(1, &["d00", "d02", "d04"]);
        assert_eq!(precision_at_k(&run3, &qrels, 3, 1), 1.0);
    }

    #[test]
    fn precision_denominator_stays_k() {
        let run = run_of(1, &["a"]);
        let qrels = qrels_of(1, &[("a", 1)]);
        assert_eq!(precision_at_k(&run, &qrels, 4, 1), 0.25);
    }

    #[test]
    fn average_precision_hand_fixture() {
        // ranked [R, N, R, N] with two relevant total
        let run = run_of(1, &["r1", "n1", "r2", "n2"]);
        let qrels = qrels_of(1, &[("r1", 1), ("r2", 2), ("n1", 0)]);
        let ap = average_precision(&run, &qrels, 1).unwrap();
        assert_relative_eq!(ap, (1.0 + 2.0 / 3.0) / 2.0, epsilon = 1e-12);
        assert_relative_eq!(ap, 0.833333, epsilon = 1e-6);
    }

    #[test]
    fn average_precision_extremes() {
        let qrels = qrels_of(1, &[("a", 1), ("b", 1)]);
        let perfect = run_of(1, &["a", "b", "x"]);
        assert_eq!(average_precision(&perfect, &qrels, 1), Some(1.0));
        let miss = run_of(1, &["x", "y"]);
        assert_eq!(average_precision(&miss, &qrels, 1), Some(0.0));
        let no_rel = qrels_of(1, &[("a", 0)]);
        assert_eq!(average_precision(&perfect, &no_rel, 1), None);
    }

    #[test]
    fn ndcg_hand_fixture() {
        // retrieved grades [2, 0, 1] against judged grades {2, 1}
        let run = run_of(1, &["g2", "g0", "g1"]);
        let qrels = qrels_of(1, &[("g2", 2), ("g1", 1)]);
        let ndcg = ndcg_at_k(&run, &qrels, 3, 1).unwrap();
        let idcg = 2.0 + 1.0 / 3f64.log2();
        assert_relative_eq!(ndcg, 2.5 / idcg, epsilon = 1e-12);
        assert_relative_eq!(ndcg, 0.95023, epsilon = 1e-5);
    }

    #[test]
    fn ndcg_extremes() {
        let qrels = qrels_of(1, &[("a", 1)]);
        let ideal = run_of(1, &["a"]);
        assert_eq!(ndcg_at_k(&ideal, &qrels, 5, 1), Some(1.0));
        let empty = Run::new("t");
        assert_eq!(ndcg_at_k(&empty, &qrels, 5, 1), Some(0.0));
        let unjudged = qrels_of(1, &[("a", 0)]);
        assert_eq!(ndcg_at_k(&ideal, &unjudged, 5, 1), None);
    }

    #[test]
    fn recall_fixtures() {
        let qrels = qrels_of(1, &[("a", 1), ("b", 1), ("c", 2), ("d", 1)]);
        let all = run_of(1, &["a", "b", "c", "d"]);
        assert_eq!(recall_at_k(&all, &qrels, 10, 1), Some(1.0));
        let run = run_of(1, &["x", "a"]);
        assert_eq!(recall_at_k(&run, &qrels, 1, 1), Some(0.0));
        let half = run_of(1, &["a", "c", "x", "y"]);
        assert_eq!(recall_at_k(&half, &qrels, 4, 1), Some(0.5));
    }

    #[test]
    fn monotone_in_k() {
        let run = run_of(1, &["a", "x", "b", "y", "c"]);
        let qrels = qrels_of(1, &[("a", 1), ("b", 1), ("c", 1)]);
        let mut prev_recall = 0.0;
        for k in 1..=5 {
            let r = recall_at_k(&run, &qrels, k, 1).unwrap();
            assert!(r >= prev_recall);
            prev_recall = r;
        }
    }

    #[test]
    fn evaluate_ideal_run_scores_one() {
        let mut qrels = Qrels::new();
        qrels.insert(1, "a", 2);
        qrels.insert(1, "b", 1);
        qrels.insert(2, "c", 1);
        let run = Run::from_scored(
            "ideal",
            [
                (1u32, vec![("a".to_string(), 2.0), ("b".to_string(), 1.0)]),
                (2u32, vec![("c".to_string(), 1.0)]),
            ],
        );
        let evaluation = evaluate(&run, &qrels, &Cutoffs::default()).unwrap();
        let ndcg = evaluation.result("ndcg@20").unwrap();
        for value in ndcg.per_topic.values() {
            assert_relative_eq!(*value, 1.0, epsilon = 1e-12);
        }
        assert_relative_eq!(ndcg.mean, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn evaluate_disjoint_topics_is_an_error() {
        let run = run_of(5, &["a"]);
        let qrels = qrels_of(1, &[("a", 1)]);
        assert_eq!(
            evaluate(&run, &qrels, &Cutoffs::default()).unwrap_err(),
            EvalError::NoEvaluableTopics
        );
    }

    #[test]
    fn evaluate_reports_exclusions() {
        let mut qrels = Qrels::new();
        qrels.insert(1, "a", 1); // evaluable
        qrels.insert(2, "b", 0); // no relevant doc
        qrels.insert(3, "c", 1); // not retrieved
        let run = run_of(1, &["a"]);
        let evaluation = evaluate(&run, &qrels, &Cutoffs::default()).unwrap();
        assert_eq!(evaluation.skipped_no_relevant, 1);
        assert_eq!(evaluation.skipped_unretrieved, 1);
        assert_eq!(evaluation.result("map").unwrap().per_topic.len(), 1);
    }

    #[test]
    fn mean_is_arithmetic_mean_of_per_topic() {
        let mut qrels = Qrels::new();
        qrels.insert(1, "a", 1);
        qrels.insert(2, "a", 1);
        qrels.insert(2, "b", 1);
        let run = Run::from_scored(
            "t",
            [
                (1u32, vec![("a".to_string(), 1.0)]),
                (2u32, vec![("x".to_string(), 2.0), ("a".to_string(), 1.0)]),
            ],
        );
        let evaluation = evaluate(&run, &qrels, &Cutoffs::default()).unwrap();
        for result in &evaluation.results {
            let mean = result.per_topic.values().sum::<f64>() / result.per_topic.len() as f64;
            assert_relative_eq!(result.mean, mean, epsilon = 1e-12);
        }
    }

    #[test]
    fn metrics_are_rank_determined() {
        let qrels = qrels_of(1, &[("a", 1), ("b", 2)]);
        let run1 = run_of(1, &["b", "x", "a"]);
        let mut run2 = run1.clone();
        for entry in run2.entries.get_mut(&1).unwrap() {
            entry.score *= 1000.0;
        }
        for metric in [
            Metric::Ndcg(3),
            Metric::Precision(3),
            Metric::Map,
            Metric::Recall(3),
        ] {
            assert_eq!(
                metric.compute(&run1, &qrels, 1),
                metric.compute(&run2, &qrels, 1)
            );
        }
    }

    #[test]
    fn residual_filter_drops_all_judged_docs() {
        let run = run_of(1, &["d1", "d2"]);
        let mut prior = Qrels::new();
        prior.insert(1, "d1", 0); // grade 0 still counts as judged
        let filtered = residual_filter(&run, &prior);
        let entries = &filtered.entries[&1];
        assert_eq!(entries.len(), 1);
        assert_eq!(entries[0].doc_id, "d2");
        assert_eq!(entries[0].rank, 1);
        assert_eq!(entries[0].score, 1.0);
    }

    #[test]
    fn residual_filter_empty_prior_is_identity() {
        let run = run_of(1, &["d1", "d2"]);
        assert_eq!(residual_filter(&run, &Qrels::new()), run);
    }

    #[test]
    fn residual_filter_can_empty_a_topic() {
        let run = run_of(1, &["d1", "d2"]);
        let mut prior = Qrels::new();
        prior.insert(1, "d1", 1);
        prior.insert(1, "d2", 2);
        let filtered = residual_filter(&run, &prior);
        assert!(filtered.entries[&1].is_empty());
        assert!(filtered.entries.contains_key(&1));
    }

    #[test]
    fn residual_filter_is_idempotent() {
        let run = run_of(1, &["d1", "d2", "d3"]);
        let mut prior = Qrels::new();
        prior.insert(1, "d2", 1);
        let once = residual_filter(&run, &prior);
        let twice = residual_filter(&once, &prior);
        assert_eq!(once, twice);
    }

    #[test]
    fn metric_parsing() {
        assert_eq!("ndcg@20".parse::<Metric>().unwrap(), Metric::Ndcg(20));
        assert_eq!("P@20".parse::<Metric>().unwrap(), Metric::Precision(20));
        assert_eq!("map".parse::<Metric>().unwrap(), Metric::Map);
        assert_eq!(
            "recall@1000".parse::<Metric>().unwrap(),
            Metric::Recall(1000)
        );
        assert!("bpref".parse::<Metric>().is_err());
        assert!("ndcg@0".parse::<Metric>().is_err());
    }

    #[test]
    fn render_report_shape() {
        let qrels = qrels_of(1, &[("a", 1)]);
        let run = run_of(1, &["a"]);
        let text = evaluate(&run, &qrels, &Cutoffs::default())
            .unwrap()
            .render();
        assert!(text.contains("ndcg@20\t1\t1.0000\n"));
        assert!(text.contains("map\tall\t1.0000\n"));
    }
}
