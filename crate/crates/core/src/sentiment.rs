//! Post-level sentiment scoring and the hourly per-stock index.
//!
//! A post scores `(sum of word weights / E) * (-1)^n` where `E` counts the
//! nonzero-weight tokens and `n` the negation tokens; posts with `E = 0`
//! carry no signal. The hourly index is the arithmetic mean of post scores
//! in a slot, accumulated in ascending post-timestamp order so the result is
//! reproducible bit for bit.

use alloc::collections::BTreeMap;
use alloc::string::String;
use core::fmt;

use crate::lexicon::Lexicon;

/// Score of a single post that contained at least one sentiment word.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PostScore {
    pub value: f64,
    /// E: number of nonzero-weight tokens.
    pub sentiment_words: u32,
    /// n: number of negation tokens.
    pub negations: u32,
}

/// Score a segmented post; `None` when no weighted token is present.
pub fn score_post(tokens: &[&str], lexicon: &Lexicon) -> Option<PostScore> {
    let mut weight_sum: i64 = 0;
    let mut sentiment_words: u32 = 0;
    let mut negations: u32 = 0;
    for token in tokens {
        if lexicon.is_negation(token) {
            negations += 1;
        } else if let Some(weight) = lexicon.weight_of(token) {
            if weight != 0 {
                sentiment_words += 1;
                weight_sum += weight as i64;
            }
        }
    }
    if sentiment_words == 0 {
        return None;
    }
    let mut value = weight_sum as f64 / sentiment_words as f64;
    if negations % 2 == 1 {
        value = -value;
    }
    Some(PostScore {
        value,
        sentiment_words,
        negations,
    })
}

/// Hourly sentiment index for one (stock, slot).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HourSentiment {
    /// Mean of the constituent post scores.
    pub value: f64,
    /// Unnormalized sum of post scores, exported alongside the mean.
    pub sum: f64,
    pub post_count: u32,
}

/// Average the scores of one slot; `scores` must already be in ascending
/// post-timestamp order. Empty input means the slot has no index value.
pub fn aggregate_hour(scores: &[f64]) -> Option<HourSentiment> {
    if scores.is_empty() {
        return None;
    }
    let sum: f64 = scores.iter().sum();
    Some(HourSentiment {
        value: sum / scores.len() as f64,
        sum,
        post_count: scores.len() as u32,
    })
}

/// Sign class used when comparing scores against hand labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignClass {
    Positive,
    Negative,
    Neutral,
}

impl SignClass {
    /// Classify a score; no-signal posts count as neutral.
    pub fn of(score: Option<f64>) -> SignClass {
        match score {
            Some(v) if v > 0.0 => SignClass::Positive,
            Some(v) if v < 0.0 => SignClass::Negative,
            _ => SignClass::Neutral,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            SignClass::Positive => "positive",
            SignClass::Negative => "negative",
            SignClass::Neutral => "neutral",
        }
    }

    pub fn parse_label(s: &str) -> Option<SignClass> {
        match s {
            "positive" => Some(SignClass::Positive),
            "negative" => Some(SignClass::Negative),
            "neutral" => Some(SignClass::Neutral),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AccuracyError {
    EmptyLabels,
    LengthMismatch { predicted: usize, labels: usize },
}

impl fmt::Display for AccuracyError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AccuracyError::EmptyLabels => f.write_str("label set is empty"),
            AccuracyError::LengthMismatch { predicted, labels } => {
                write!(f, "{predicted} predictions vs {labels} labels")
            }
        }
    }
}

impl core::error::Error for AccuracyError {}

/// Fraction of posts whose predicted sign class matches the hand label.
pub fn evaluate_accuracy(
    predicted: &[SignClass],
    labels: &[SignClass],
) -> Result<f64, AccuracyError> {
    if labels.is_empty() {
        return Err(AccuracyError::EmptyLabels);
    }
    if predicted.len() != labels.len() {
        return Err(AccuracyError::LengthMismatch {
            predicted: predicted.len(),
            labels: labels.len(),
        });
    }
    let matches = predicted
        .iter()
        .zip(labels)
        .filter(|(p, l)| p == l)
        .count();
    Ok(matches as f64 / labels.len() as f64)
}

/// Tally tokens the lexicon does not know, for the human-labeling report.
/// Pure-whitespace tokens are skipped.
pub fn record_unmatched(tokens: &[&str], lexicon: &Lexicon, counts: &mut BTreeMap<String, u64>) {
    for token in tokens {
        if lexicon.contains(token) || token.chars().all(char::is_whitespace) {
            continue;
        }
        *counts.entry(String::from(*token)).or_insert(0) += 1;
    }
}
