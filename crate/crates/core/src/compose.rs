//! Utterances, their composed scores over candidate objects, and the commit rule.
//!
//! A candidate's score is the product of every token's response on it. Scores
//! are accumulated as log-sums so long utterances cannot underflow, and the
//! per-candidate geometric mean is kept as an absolute ("raw") score next to
//! the probability normalized over the candidate set.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureVector, ObjectId};
use crate::lexicon::{normalize_token, Lexicon};

const PUNCTUATION: [char; 8] = ['.', ',', '!', '?', ';', ':', '\'', '"'];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Utterance {
    pub raw: String,
    pub tokens: Vec<String>,
}

/// Lowercases, strips `. , ! ? ; : ' "` and splits on whitespace.
pub fn tokenize(text: &str) -> Utterance {
    let cleaned: String = text.chars().filter(|c| !PUNCTUATION.contains(c)).collect();
    let tokens = cleaned.split_whitespace().map(normalize_token).filter(|t| !t.is_empty()).collect();
    Utterance { raw: String::from(text), tokens }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CandidateEntry {
    pub object_id: ObjectId,
    /// Geometric mean of the token responses (0.5 with no tokens).
    pub raw: f64,
    /// Product score normalized over the candidate set.
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateDistribution {
    entries: Vec<CandidateEntry>,
    words_applied: usize,
    #[serde(skip)]
    log_scores: Vec<f64>,
}

impl CandidateDistribution {
    /// Uniform distribution over `candidates`, as if no word had been heard.
    pub fn uniform(candidates: &[(ObjectId, FeatureVector)]) -> Result<Self> {
        check_unique(candidates)?;
        let ids: Vec<ObjectId> = candidates.iter().map(|(id, _)| *id).collect();
        Ok(Self::from_log_scores(&ids, alloc::vec![0.0; ids.len()], 0))
    }

    fn from_log_scores(ids: &[ObjectId], log_scores: Vec<f64>, words_applied: usize) -> Self {
        let max = log_scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let weights: Vec<f64> = log_scores.iter().map(|l| libm::exp(l - max)).collect();
        let total: f64 = weights.iter().sum();
        let entries = ids
            .iter()
            .zip(log_scores.iter().zip(weights.iter()))
            .map(|(&object_id, (&log, &w))| CandidateEntry {
                object_id,
                raw: if words_applied == 0 { 0.5 } else { libm::exp(log / words_applied as f64) },
                probability: w / total,
            })
            .collect();
        CandidateDistribution { entries, words_applied, log_scores }
    }

    pub fn entries(&self) -> &[CandidateEntry] {
        &self.entries
    }

    pub fn words_applied(&self) -> usize {
        self.words_applied
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: ObjectId) -> Option<&CandidateEntry> {
        self.entries.iter().find(|e| e.object_id == id)
    }

    /// Log of each candidate's unnormalized product score.
    pub fn log_scores(&self) -> &[f64] {
        &self.log_scores
    }

    /// Folds one more word into the distribution.
    pub fn apply_word(
        &self,
        lexicon: &Lexicon,
        token: &str,
        candidates: &[(ObjectId, FeatureVector)],
    ) -> Result<CandidateDistribution> {
        if candidates.len() != self.entries.len()
            || candidates.iter().zip(&self.entries).any(|((id, _), e)| *id != e.object_id)
        {
            return Err(Error::InvalidState(String::from("candidate set differs from the distribution's")));
        }
        let classifier = lexicon.lookup(token);
        let logs = self.log_scores.iter().zip(candidates).map(|(acc, (_, x))| acc + classifier.log_response(x)).collect();
        let ids: Vec<ObjectId> = candidates.iter().map(|(id, _)| *id).collect();
        Ok(Self::from_log_scores(&ids, logs, self.words_applied + 1))
    }
}

fn check_unique(candidates: &[(ObjectId, FeatureVector)]) -> Result<()> {
    for (i, (id, _)) in candidates.iter().enumerate() {
        if candidates[..i].iter().any(|(other, _)| other == id) {
            return Err(Error::invalid(alloc::format!("duplicate candidate {id}")));
        }
    }
    Ok(())
}

/// Scores every candidate against the whole token sequence at once.
pub fn score_candidates(
    lexicon: &Lexicon,
    tokens: &[String],
    candidates: &[(ObjectId, FeatureVector)],
) -> Result<CandidateDistribution> {
    check_unique(candidates)?;
    let classifiers: Vec<_> = tokens.iter().map(|t| lexicon.lookup(t)).collect();
    let logs = candidates
        .iter()
        .map(|(_, x)| classifiers.iter().fold(0.0, |acc, c| acc + c.log_response(x)))
        .collect();
    let ids: Vec<ObjectId> = candidates.iter().map(|(id, _)| *id).collect();
    Ok(CandidateDistribution::from_log_scores(&ids, logs, tokens.len()))
}

/// Commit thresholds: the argmax must reach `commit` in normalized
/// probability and `raw` in geometric-mean response.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawThresholds")]
pub struct Thresholds {
    pub commit: f64,
    pub raw: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawThresholds {
    commit: f64,
    raw: f64,
}

impl TryFrom<RawThresholds> for Thresholds {
    type Error = Error;

    fn try_from(raw: RawThresholds) -> Result<Self> {
        Thresholds::new(raw.commit, raw.raw)
    }
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds { commit: 0.7, raw: 0.5 }
    }
}

impl Thresholds {
    pub fn new(commit: f64, raw: f64) -> Result<Self> {
        for (name, v) in [("commit", commit), ("raw", raw)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::invalid(alloc::format!("{name} threshold {v} outside [0, 1]")));
            }
        }
        Ok(Thresholds { commit, raw })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "object_id", rename_all = "lowercase")]
pub enum Decision {
    Commit(ObjectId),
    Undecided,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Resolution {
    pub decision: Decision,
    pub confidence: f64,
    pub raw_score: f64,
}

/// Highest-probability entry; ties go to the lowest object id.
pub fn argmax(distribution: &CandidateDistribution) -> Option<&CandidateEntry> {
    distribution.entries().iter().reduce(|best, e| {
        if e.probability > best.probability || (e.probability == best.probability && e.object_id < best.object_id) {
            e
        } else {
            best
        }
    })
}

pub fn resolve(distribution: &CandidateDistribution, thresholds: &Thresholds) -> Resolution {
    match argmax(distribution) {
        None => Resolution { decision: Decision::Undecided, confidence: 0.0, raw_score: 0.0 },
        Some(best) => {
            let commit = best.probability >= thresholds.commit && best.raw >= thresholds.raw;
            Resolution {
                decision: if commit { Decision::Commit(best.object_id) } else { Decision::Undecided },
                confidence: best.probability,
                raw_score: best.raw,
            }
        }
    }
}
