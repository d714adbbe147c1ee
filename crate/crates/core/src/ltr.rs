//! A desk-scale listwise ranker: a logistic scoring layer over fixed
//! document feature vectors, trained with a softmax ranking loss.
//!
//! The scorer is `s(d) = sigma(W . e(d) + b)` for a feature vector `e(d)`;
//! the loss for one query with candidate scores `s` and non-negative labels
//! `y` is the cross-entropy between the normalized labels and the softmax
//! of the scores:
//!
//! ```text
//! loss(s, y) = - sum_d (y_d / sum(y)) * log( exp(s_d) / sum_d' exp(s_d') )
//! ```
//!
//! computed with a max-shifted log-sum-exp. Training samples, per step, one
//! positive candidate plus `l - 1` random negatives and takes one gradient
//! step through the scorer (the chain rule picks up sigma'). Everything is
//! deterministic given the seed.

use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LtrError {
    #[error("feature dimension mismatch: scorer has {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("scores and labels must have equal, non-zero length")]
    LengthMismatch,
    #[error("labels sum to zero")]
    ZeroLabelMass,
    #[error("candidate subset size l must be >= 2, got {0}")]
    BadSubsetSize(usize),
    #[error("no training examples")]
    NoExamples,
    #[error("training example for topic {0} has no positive candidate")]
    NoPositive(u32),
    #[error("steps must be >= 1")]
    NoSteps,
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Logistic scoring layer: `sigma(W . features + bias)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearScorer {
    pub weights: Vec<f64>,
    pub bias: f64,
}

#[derive(Serialize, Deserialize)]
struct ScorerFile {
    feature_dim: usize,
    #[serde(rename = "W")]
    weights: Vec<f64>,
    bias: f64,
}

impl LinearScorer {
    pub fn zeros(feature_dim: usize) -> Self {
        LinearScorer {
            weights: vec![0.0; feature_dim],
            bias: 0.0,
        }
    }

    pub fn feature_dim(&self) -> usize {
        self.weights.len()
    }

    /// Pre-activation score `W . features + bias`.
    pub fn raw_score(&self, features: &[f64]) -> Result<f64, LtrError> {
        if features.len() != self.weights.len() {
            return Err(LtrError::DimensionMismatch {
                expected: self.weights.len(),
                found: features.len(),
            });
        }
        let dot: f64 = self.weights.iter().zip(features).map(|(w, x)| w * x).sum();
        Ok(dot + self.bias)
    }

    /// `sigma(W . features + bias)`; strictly monotone in the raw score, so
    /// ranking by either is equivalent.
    pub fn score(&self, features: &[f64]) -> Result<f64, LtrError> {
        Ok(sigmoid(self.raw_score(features)?))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&ScorerFile {
            feature_dim: self.weights.len(),
            weights: self.weights.clone(),
            bias: self.bias,
        })
        .expect("scorer serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, LtrError> {
        let file: ScorerFile = serde_json::from_str(text)?;
        if file.weights.len() != file.feature_dim {
            return Err(LtrError::DimensionMismatch {
                expected: file.feature_dim,
                found: file.weights.len(),
            });
        }
        Ok(LinearScorer {
            weights: file.weights,
            bias: file.bias,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), LtrError> {
        let mut file = std::fs::File::create(path)?;
        file.write_all(self.to_json().as_bytes())?;
        file.write_all(b"\n")?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, LtrError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// One scored candidate document with its feature vector and ground-truth
/// relevance label (non-negative; 0 means irrelevant).
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub doc_id: String,
    pub features: Vec<f64>,
    pub label: f64,
}

/// A query's candidate set with labels.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingExample {
    pub topic: u32,
    pub candidates: Vec<Candidate>,
}

impl TrainingExample {
    pub fn has_positive(&self) -> bool {
        self.candidates.iter().any(|c| c.label > 0.0)
    }
}

/// Softmax over `scores`, max-shifted.
fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let exps: Vec<f64> = scores.iter().map(|&s| (s - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

fn check_pair(scores: &[f64], labels: &[f64]) -> Result<f64, LtrError> {
    if scores.is_empty() || scores.len() != labels.len() {
        return Err(LtrError::LengthMismatch);
    }
    let mass: f64 = labels.iter().sum();
    if mass <= 0.0 {
        return Err(LtrError::ZeroLabelMass);
    }
    Ok(mass)
}

/// The listwise softmax ranking loss (non-negative; 0 for a lone candidate).
pub fn softmax_ranking_loss(scores: &[f64], labels: &[f64]) -> Result<f64, LtrError> {
    let mass = check_pair(scores, labels)?;
    let max = scores.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let log_sum: f64 = scores.iter().map(|&s| (s - max).exp()).sum::<f64>().ln() + max;
    let mut loss = 0.0;
    for (&s, &y) in scores.iter().zip(labels) {
        if y > 0.0 {
            loss -= (y / mass) * (s - log_sum);
        }
    }
    Ok(loss)
}

/// Gradient of [`softmax_ranking_loss`] with respect to the scores:
/// `softmax(s) - y / sum(y)`. Components always sum to zero.
pub fn loss_gradient(scores: &[f64], labels: &[f64]) -> Result<Vec<f64>, LtrError> {
    let mass = check_pair(scores, labels)?;
    let probs = softmax(scores);
    Ok(probs
        .into_iter()
        .zip(labels)
        .map(|(p, &y)| p - y / mass)
        .collect())
}

/// A sampled candidate subset: one positive plus up to `l - 1` negatives.
/// `no_negatives` flags examples that had no negatives to draw from.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSample {
    pub example: TrainingExample,
    pub no_negatives: bool,
}

/// Sample a training subset of size at most `l`: one uniformly chosen
/// positive candidate plus `l - 1` zero-label candidates drawn uniformly
/// without replacement (all of them when fewer exist). Deterministic given
/// `seed`.
pub fn sample_candidates(
    example: &TrainingExample,
    l: usize,
    seed: u64,
) -> Result<CandidateSample, LtrError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_candidates_with(example, l, &mut rng)
}

fn sample_candidates_with(
    example: &TrainingExample,
    l: usize,
    rng: &mut ChaCha8Rng,
) -> Result<CandidateSample, LtrError> {
    if l < 2 {
        return Err(LtrError::BadSubsetSize(l));
    }
    let positives: Vec<&Candidate> = example
        .candidates
        .iter()
        .filter(|c| c.label > 0.0)
        .collect();
    if positives.is_empty() {
        return Err(LtrError::NoPositive(example.topic));
    }
    let negatives: Vec<&Candidate> = example
        .candidates
        .iter()
        .filter(|c| c.label == 0.0)
        .collect();

    let positive = positives[rng.gen_range(0..positives.len())].clone();
    let mut chosen: Vec<Candidate> = vec![positive];
    let take = (l - 1).min(negatives.len());
    let mut picks: Vec<usize> = (0..negatives.len()).collect();
    picks.shuffle(rng);
    picks.truncate(take);
    // Keep the negatives in their original candidate order so the output
    // depends only on which docs were drawn.
    picks.sort_unstable();
    chosen.extend(picks.into_iter().map(|i| negatives[i].clone()));

    Ok(CandidateSample {
        no_negatives: negatives.is_empty(),
        example: TrainingExample {
            topic: example.topic,
            candidates: chosen,
        },
    })
}

/// The softmax ranking loss of `scorer` on one example, over all
/// candidates, using sigmoid scores (the same scores training sees).
pub fn example_loss(scorer: &LinearScorer, example: &TrainingExample) -> Result<f64, LtrError> {
    let scores: Vec<f64> = example
        .candidates
        .iter()
        .map(|c| scorer.score(&c.features))
        .collect::<Result<_, _>>()?;
    let labels: Vec<f64> = example.candidates.iter().map(|c| c.label).collect();
    softmax_ranking_loss(&scores, &labels)
}

/// Mean [`example_loss`] across examples.
pub fn mean_loss(scorer: &LinearScorer, examples: &[TrainingExample]) -> Result<f64, LtrError> {
    if examples.is_empty() {
        return Err(LtrError::NoExamples);
    }
    let total: f64 = examples
        .iter()
        .map(|e| example_loss(scorer, e))
        .sum::<Result<f64, _>>()?;
    Ok(total / examples.len() as f64)
}

/// Train a [`LinearScorer`] by stochastic gradient descent from zero
/// initialization: each step picks one example, samples a candidate subset
/// of size `l`, and descends the softmax ranking loss through the sigmoid.
/// Deterministic given `seed`.
pub fn train_linear(
    examples: &[TrainingExample],
    l: usize,
    steps: usize,
    learning_rate: f64,
    seed: u64,
) -> Result<LinearScorer, LtrError> {
    if examples.is_empty() {
        return Err(LtrError::NoExamples);
    }
    if steps == 0 {
        return Err(LtrError::NoSteps);
    }
    if l < 2 {
        return Err(LtrError::BadSubsetSize(l));
    }
    let dim = examples[0]
        .candidates
        .first()
        .map(|c| c.features.len())
        .unwrap_or(0);
    for example in examples {
        if !example.has_positive() {
            return Err(LtrError::NoPositive(example.topic));
        }
        for candidate in &example.candidates {
            if candidate.features.len() != dim {
                return Err(LtrError::DimensionMismatch {
                    expected: dim,
                    found: candidate.features.len(),
                });
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut scorer = LinearScorer::zeros(dim);
    for _ in 0..steps {
        let example = &examples[rng.gen_range(0..examples.len())];
        let sample = sample_candidates_with(example, l, &mut rng)?;
        let candidates = &sample.example.candidates;

        let raw: Vec<f64> = candidates
            .iter()
            .map(|c| scorer.raw_score(&c.features))
            .collect::<Result<_, _>>()?;
        let scores: Vec<f64> = raw.iter().map(|&z| sigmoid(z)).collect();
        let labels: Vec<f64> = candidates.iter().map(|c| c.label).collect();
        let grad = loss_gradient(&scores, &labels)?;

        // d loss / d z_i = g_i * sigma'(z_i), with sigma' = s (1 - s)
        let mut grad_bias = 0.0;
        let mut grad_w = vec![0.0; dim];
        for ((g, s), candidate) in grad.iter().zip(&scores).zip(candidates) {
            let dz = g * s * (1.0 - s);
            grad_bias += dz;
            for (gw, &x) in grad_w.iter_mut().zip(&candidate.features) {
                *gw += dz * x;
            }
        }
        for (w, gw) in scorer.weights.iter_mut().zip(&grad_w) {
            *w -= learning_rate * gw;
        }
        scorer.bias -= learning_rate * grad_bias;
    }
    Ok(scorer)
}

#[derive(Deserialize)]
struct FeatureLine {
    topic: u32,
    doc_id: String,
    features: Vec<f64>,
    #[serde(default)]
    label: f64,
}

/// Parse a JSON-Lines feature file (`{topic, doc_id, features, label}`,
/// label optional) into per-topic examples, topics ascending, candidates in
/// file order. Feature dimensions must agree.
pub fn load_features(text: &str) -> Result<Vec<TrainingExample>, LtrError> {
    let mut by_topic: std::collections::BTreeMap<u32, Vec<Candidate>> =
        std::collections::BTreeMap::new();
    let mut dim: Option<usize> = None;
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let row: FeatureLine = serde_json::from_str(line).map_err(|e| LtrError::Malformed {
            line: line_no,
            message: e.to_string(),
        })?;
        if row.label < 0.0 {
            return Err(LtrError::Malformed {
                line: line_no,
                message: format!("negative label {}", row.label),
            });
        }
        let expected = *dim.get_or_insert(row.features.len());
        if row.features.len() != expected {
            return Err(LtrError::Malformed {
                line: line_no,
                message: format!(
                    "feature dimension {} (expected {expected})",
                    row.features.len()
                ),
            });
        }
        by_topic.entry(row.topic).or_default().push(Candidate {
            doc_id: row.doc_id,
            features: row.features,
            label: row.label,
        });
    }
    Ok(by_topic
        .into_iter()
        .map(|(topic, candidates)| TrainingExample { topic, candidates })
        .collect())
}
