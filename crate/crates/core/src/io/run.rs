//! TREC run files: `topic Q0 doc_id rank score tag`, one entry per line.

use std::collections::BTreeMap;

use super::{format_sig, IoError};

/// One retrieved document within a topic's ranked list.
#[derive(Debug, Clone, PartialEq)]
pub struct RunEntry {
    pub doc_id: String,
    /// 1-based rank; contiguous within a topic.
    pub rank: u32,
    pub score: f64,
}

/// A per-topic ranked list of documents with scores: the unit output of
/// any retrieval or ranking system.
///
/// Invariants, enforced by [`parse_run`] and [`Run::validate`]:
/// per topic, ranks are exactly `1..=n`, doc ids are unique, and scores are
/// non-increasing in rank.
#[derive(Debug, Clone, PartialEq)]
pub struct Run {
    pub tag: String,
    /// Topic number -> entries in rank order.
    pub entries: BTreeMap<u32, Vec<RunEntry>>,
}

impl Run {
    pub fn new(tag: impl Into<String>) -> Self {
        Run {
            tag: tag.into(),
            entries: BTreeMap::new(),
        }
    }

    /// Build a run from per-topic `(doc_id, score)` lists that are already
    /// in final order; ranks are assigned 1..n in list order.
    pub fn from_scored<I, L>(tag: impl Into<String>, topics: I) -> Self
    where
        I: IntoIterator<Item = (u32, L)>,
        L: IntoIterator<Item = (String, f64)>,
    {
        let mut run = Run::new(tag);
        for (topic, list) in topics {
            run.set_topic(topic, list);
        }
        run
    }

    /// Replace one topic's ranked list; ranks are assigned in list order.
    pub fn set_topic<L>(&mut self, topic: u32, list: L)
    where
        L: IntoIterator<Item = (String, f64)>,
    {
        let entries = list
            .into_iter()
            .enumerate()
            .map(|(i, (doc_id, score))| RunEntry {
                doc_id,
                rank: i as u32 + 1,
                score,
            })
            .collect();
        self.entries.insert(topic, entries);
    }

    pub fn topics(&self) -> impl Iterator<Item = u32> + '_ {
        self.entries.keys().copied()
    }

    /// Total number of entries across all topics.
    pub fn len(&self) -> usize {
        self.entries.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Keep only the top `depth` entries per topic.
    pub fn truncate_depth(&mut self, depth: usize) {
        for list in self.entries.values_mut() {
            list.truncate(depth);
        }
    }

    /// Check the run invariants; parse errors aside, this is what
    /// [`parse_run`] enforces line by line.
    pub fn validate(&self) -> Result<(), IoError> {
        for (&topic, list) in &self.entries {
            let mut seen = std::collections::HashSet::new();
            for (i, entry) in list.iter().enumerate() {
                let expected = i as u32 + 1;
                if entry.rank != expected {
                    return Err(IoError::RunInvariant {
                        topic,
                        line: 0,
                        message: format!("rank gap: expected {expected}, found {}", entry.rank),
                    });
                }
                if !seen.insert(entry.doc_id.as_str()) {
                    return Err(IoError::RunInvariant {
                        topic,
                        line: 0,
                        message: format!("duplicate doc_id `{}`", entry.doc_id),
                    });
                }
                if i > 0 && entry.score > list[i - 1].score {
                    return Err(IoError::RunInvariant {
                        topic,
                        line: 0,
                        message: format!("score increases at rank {}", entry.rank),
                    });
                }
            }
        }
        Ok(())
    }
}

/// Parse TREC run text. Lines may arrive in any order; entries are grouped
/// by topic, sorted by rank, and the run invariants are checked. The run
/// tag is taken from the first non-empty line.
pub fn parse_run(text: &str) -> Result<Run, IoError> {
    let mut tag: Option<String> = None;
    // topic -> (line, doc_id, rank, score), collected before validation
    let mut raw: BTreeMap<u32, Vec<(usize, String, u32, f64)>> = BTreeMap::new();

    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 6 {
            return Err(IoError::Malformed {
                line: line_no,
                message: format!("expected 6 fields, found {}", fields.len()),
            });
        }
        let topic: u32 = fields[0].parse().map_err(|_| IoError::Malformed {
            line: line_no,
            message: format!("invalid topic number `{}`", fields[0]),
        })?;
        let rank: u32 = fields[3].parse().map_err(|_| IoError::Malformed {
            line: line_no,
            message: format!("invalid rank `{}`", fields[3]),
        })?;
        if rank == 0 {
            return Err(IoError::Malformed {
                line: line_no,
                message: "rank must be positive".to_string(),
            });
        }
        let score: f64 = fields[4].parse().map_err(|_| IoError::Malformed {
            line: line_no,
            message: format!("invalid score `{}`", fields[4]),
        })?;
        if !score.is_finite() {
            return Err(IoError::Malformed {
                line: line_no,
                message: format!("non-finite score `{}`", fields[4]),
            });
        }
        if tag.is_none() {
            tag = Some(fields[5].to_string());
        }
        raw.entry(topic)
            .or_default()
            .push((line_no, fields[2].to_string(), rank, score));
    }

    let mut run = Run::new(tag.unwrap_or_default());
    for (topic, mut list) in raw {
        list.sort_by_key(|(_, _, rank, _)| *rank);
        let mut entries = Vec::with_capacity(list.len());
        let mut seen = std::collections::HashSet::new();
        for (i, (line, doc_id, rank, score)) in list.into_iter().enumerate() {
            let expected = i as u32 + 1;
            if rank != expected {
                let message = if rank == expected - 1 {
                    format!("duplicate rank {rank}")
                } else {
                    format!("rank gap: expected {expected}, found {rank}")
                };
                return Err(IoError::RunInvariant {
                    topic,
                    line,
                    message,
                });
            }
            if !seen.insert(doc_id.clone()) {
                return Err(IoError::RunInvariant {
                    topic,
                    line,
                    message: format!("duplicate doc_id `{doc_id}`"),
                });
            }
            if let Some(prev) = entries.last() {
                let prev: &RunEntry = prev;
                if score > prev.score {
                    return Err(IoError::RunInvariant {
                        topic,
                        line,
                        message: format!("score increases at rank {rank}"),
                    });
                }
            }
            entries.push(RunEntry {
                doc_id,
                rank,
                score,
            });
        }
        run.entries.insert(topic, entries);
    }
    Ok(run)
}

/// Serialize a run in TREC format: topics in ascending numeric order,
/// entries in rank order, scores at 6 significant digits.
pub fn write_run(run: &Run) -> String {
    let mut out = String::new();
    for (topic, list) in &run.entries {
        for entry in list {
            out.push_str(&format!(
                "{topic} Q0 {} {} {} {}\n",
                entry.doc_id,
                entry.rank,
                format_sig(entry.score, 6),
                run.tag
            ));
        }
    }
    out
}
