//! TREC qrels files: `topic iteration doc_id grade`, one judgment per line.

use std::collections::BTreeMap;

use super::IoError;

/// Graded relevance judgments keyed by (topic, document).
///
/// Grades are non-negative; negative (unjudged) entries are dropped at
/// parse time and counted in [`QrelsParse::dropped_negative`].
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Qrels {
    judgments: BTreeMap<u32, BTreeMap<String, i64>>,
}

impl Qrels {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, topic: u32, doc_id: impl Into<String>, grade: i64) {
        debug_assert!(grade >= 0);
        self.judgments
            .entry(topic)
            .or_default()
            .insert(doc_id.into(), grade);
    }

    pub fn grade(&self, topic: u32, doc_id: &str) -> Option<i64> {
        self.judgments.get(&topic)?.get(doc_id).copied()
    }

    /// Whether (topic, doc) has any judgment, including grade 0.
    pub fn is_judged(&self, topic: u32, doc_id: &str) -> bool {
        self.grade(topic, doc_id).is_some()
    }

    pub fn topics(&self) -> impl Iterator<Item = u32> + '_ {
        self.judgments.keys().copied()
    }

    pub fn topic_judgments(&self, topic: u32) -> Option<&BTreeMap<String, i64>> {
        self.judgments.get(&topic)
    }

    /// Number of documents with grade >= 1 for `topic`.
    pub fn relevant_count(&self, topic: u32) -> usize {
        self.judgments
            .get(&topic)
            .map(|m| m.values().filter(|&&g| g >= 1).count())
            .unwrap_or(0)
    }

    /// All positive grades for `topic`, sorted descending (the ideal-gain
    /// ordering used for IDCG).
    pub fn grades_descending(&self, topic: u32) -> Vec<i64> {
        let mut grades: Vec<i64> = self
            .judgments
            .get(&topic)
            .map(|m| m.values().copied().filter(|&g| g > 0).collect())
            .unwrap_or_default();
        grades.sort_unstable_by(|a, b| b.cmp(a));
        grades
    }

    /// Total number of stored judgments.
    pub fn len(&self) -> usize {
        self.judgments.values().map(BTreeMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Result of [`parse_qrels`]: the judgments plus bookkeeping about what the
/// parser dropped or overwrote.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QrelsParse {
    pub qrels: Qrels,
    /// Lines dropped because the grade was negative.
    pub dropped_negative: usize,
    /// (topic, doc) keys that occurred more than once; the last grade wins.
    pub duplicates: usize,
}

/// Parse qrels text. Negative grades are dropped (counted); duplicate
/// (topic, doc) keys resolve to the last occurrence (counted).
pub fn parse_qrels(text: &str) -> Result<QrelsParse, IoError> {
    let mut qrels = Qrels::new();
    let mut dropped_negative = 0;
    let mut duplicates = 0;

    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(IoError::Malformed {
                line: line_no,
                message: format!("expected 4 fields, found {}", fields.len()),
            });
        }
        let topic: u32 = fields[0].parse().map_err(|_| IoError::Malformed {
            line: line_no,
            message: format!("invalid topic number `{}`", fields[0]),
        })?;
        let grade: i64 = fields[3].parse().map_err(|_| IoError::Malformed {
            line: line_no,
            message: format!("invalid grade `{}`", fields[3]),
        })?;
        if grade < 0 {
            dropped_negative += 1;
            continue;
        }
        let per_topic = qrels.judgments.entry(topic).or_default();
        if per_topic.insert(fields[2].to_string(), grade).is_some() {
            duplicates += 1;
        }
    }
    Ok(QrelsParse {
        qrels,
        dropped_negative,
        duplicates,
    })
}

/// Serialize qrels in TREC format with iteration column 0, topics and doc
/// ids in ascending order.
pub fn write_qrels(qrels: &Qrels) -> String {
    let mut out = String::new();
    for (topic, docs) in &qrels.judgments {
        for (doc_id, grade) in docs {
            out.push_str(&format!("{topic} 0 {doc_id} {grade}\n"));
        }
    }
    out
}
