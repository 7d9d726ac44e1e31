//! Merged sentiment dictionary, negation list, and deterministic
//! forward-maximum-matching segmentation.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

/// How to resolve a word carrying different weights in different sources.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConflictPolicy {
    /// The highest-priority (first-listed) source wins.
    FirstWins,
    /// Weights are summed across sources and the sign of the sum is kept.
    SumSign,
}

/// One weighted word after the merge, tagged with the source that decided it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LexiconEntry {
    pub word: String,
    pub weight: i8,
    pub source: String,
}

/// One upstream dictionary, in priority order within the merge input.
#[derive(Debug, Clone, Default)]
pub struct LexiconSource {
    pub name: String,
    pub weighted: Vec<(String, i8)>,
    pub negations: Vec<String>,
}

/// A cross-source disagreement recorded during the merge.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MergeConflict {
    Weight {
        word: String,
        kept: i8,
        kept_source: String,
        dropped: i8,
        dropped_source: String,
    },
    /// A word listed both as weighted and as a negation; negation wins.
    NegationOverlap {
        word: String,
        dropped_weight: i8,
        dropped_source: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LexiconError {
    /// No weighted entries survived the merge.
    Empty,
    EmptyWord { source: String },
    InvalidWeight { word: String, weight: i8 },
}

impl fmt::Display for LexiconError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LexiconError::Empty => f.write_str("merged lexicon has no weighted entries"),
            LexiconError::EmptyWord { source } => {
                write!(f, "empty word in source {source}")
            }
            LexiconError::InvalidWeight { word, weight } => {
                write!(f, "weight {weight} for word {word} outside -1..=1")
            }
        }
    }
}

impl core::error::Error for LexiconError {}

/// Immutable merged dictionary: weighted entries, negation words, and the
/// longest key length in characters (the segmenter's lookahead cap).
#[derive(Debug, Clone)]
pub struct Lexicon {
    entries: BTreeMap<String, LexiconEntry>,
    negations: BTreeSet<String>,
    max_word_chars: usize,
}

impl Lexicon {
    /// Merge sources in priority order (first = highest priority).
    ///
    /// Returns the lexicon and every conflict encountered, in encounter order.
    pub fn merge(
        sources: &[LexiconSource],
        policy: ConflictPolicy,
    ) -> Result<(Lexicon, Vec<MergeConflict>), LexiconError> {
        let mut conflicts = Vec::new();
        let mut negations: BTreeSet<String> = BTreeSet::new();
        for source in sources {
            for word in &source.negations {
                if word.is_empty() {
                    return Err(LexiconError::EmptyWord {
                        source: source.name.clone(),
                    });
                }
                negations.insert(word.clone());
            }
        }

        // first_seen: (weight, source) of the first occurrence; sums for SumSign
        let mut first_seen: BTreeMap<String, (i8, String)> = BTreeMap::new();
        let mut sums: BTreeMap<String, i32> = BTreeMap::new();
        for source in sources {
            for (word, weight) in &source.weighted {
                if word.is_empty() {
                    return Err(LexiconError::EmptyWord {
                        source: source.name.clone(),
                    });
                }
                if !(-1..=1).contains(weight) {
                    return Err(LexiconError::InvalidWeight {
                        word: word.clone(),
                        weight: *weight,
                    });
                }
                if negations.contains(word) {
                    conflicts.push(MergeConflict::NegationOverlap {
                        word: word.clone(),
                        dropped_weight: *weight,
                        dropped_source: source.name.clone(),
                    });
                    continue;
                }
                *sums.entry(word.clone()).or_insert(0) += *weight as i32;
                match first_seen.get(word) {
                    None => {
                        first_seen.insert(word.clone(), (*weight, source.name.clone()));
                    }
                    Some((kept, kept_source)) if *kept != *weight => {
                        conflicts.push(MergeConflict::Weight {
                            word: word.clone(),
                            kept: *kept,
                            kept_source: kept_source.clone(),
                            dropped: *weight,
                            dropped_source: source.name.clone(),
                        });
                    }
                    Some(_) => {}
                }
            }
        }

        let mut entries = BTreeMap::new();
        for (word, (first_weight, source)) in first_seen {
            let weight = match policy {
                ConflictPolicy::FirstWins => first_weight,
                ConflictPolicy::SumSign => sums[&word].signum() as i8,
            };
            entries.insert(
                word.clone(),
                LexiconEntry {
                    word,
                    weight,
                    source,
                },
            );
        }
        if entries.is_empty() {
            return Err(LexiconError::Empty);
        }

        let max_word_chars = entries
            .keys()
            .chain(negations.iter())
            .map(|w| w.chars().count())
            .max()
            .unwrap_or(0);
        Ok((
            Lexicon {
                entries,
                negations,
                max_word_chars,
            },
            conflicts,
        ))
    }

    pub fn weight_of(&self, token: &str) -> Option<i8> {
        self.entries.get(token).map(|e| e.weight)
    }

    pub fn is_negation(&self, token: &str) -> bool {
        self.negations.contains(token)
    }

    /// True when the token is a weighted entry or a negation word.
    pub fn contains(&self, token: &str) -> bool {
        self.entries.contains_key(token) || self.negations.contains(token)
    }

    pub fn entries(&self) -> impl Iterator<Item = &LexiconEntry> {
        self.entries.values()
    }

    pub fn max_word_chars(&self) -> usize {
        self.max_word_chars
    }

    pub fn weighted_count(&self) -> usize {
        self.entries.len()
    }

    pub fn negation_count(&self) -> usize {
        self.negations.len()
    }

    /// (positive, negative, neutral) entry counts.
    pub fn weight_counts(&self) -> (usize, usize, usize) {
        let mut pos = 0;
        let mut neg = 0;
        let mut zero = 0;
        for e in self.entries.values() {
            match e.weight {
                1 => pos += 1,
                -1 => neg += 1,
                _ => zero += 1,
            }
        }
        (pos, neg, zero)
    }
}

/// Greedy forward maximum matching over the lexicon.
///
/// At each position the longest lexicon word (weighted or negation) starting
/// there is taken, capped at the lexicon's longest key; when nothing matches,
/// a single character is emitted. Tokens are slices of the input, so their
/// concatenation reproduces it exactly.
pub fn segment<'t>(text: &'t str, lexicon: &Lexicon) -> Vec<&'t str> {
    let max_chars = lexicon.max_word_chars().max(1);
    let mut tokens = Vec::new();
    let mut start = 0;
    while start < text.len() {
        let rest = &text[start..];
        let mut first_char_end = 0;
        let mut best_end = 0;
        for (count, (idx, ch)) in rest.char_indices().enumerate() {
            let end = idx + ch.len_utf8();
            if count == 0 {
                first_char_end = end;
            }
            if lexicon.contains(&rest[..end]) {
                best_end = end;
            }
            if count + 1 == max_chars {
                break;
            }
        }
        let token_end = if best_end > 0 { best_end } else { first_char_end };
        tokens.push(&rest[..token_end]);
        start += token_end;
    }
    tokens
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use alloc::vec;

    fn source(name: &str, weighted: &[(&str, i8)], negations: &[&str]) -> LexiconSource {
        LexiconSource {
            name: name.to_string(),
            weighted: weighted
                .iter()
                .map(|(w, s)| (w.to_string(), *s))
                .collect(),
            negations: negations.iter().map(|w| w.to_string()).collect(),
        }
    }

    #[test]
    fn single_file_merge() {
        let (lex, conflicts) =
            Lexicon::merge(&[source("a", &[("涨", 1)], &[])], ConflictPolicy::FirstWins).unwrap();
        assert_eq!(lex.weighted_count(), 1);
        assert_eq!(lex.weight_counts(), (1, 0, 0));
        assert_eq!(lex.weight_of("涨"), Some(1));
        assert!(conflicts.is_empty());
    }

    #[test]
    fn priority_order_decides_conflicts() {
        let (lex, conflicts) = Lexicon::merge(
            &[
                source("a", &[("套牢", -1)], &[]),
                source("b", &[("套牢", 1)], &[]),
            ],
            ConflictPolicy::FirstWins,
        )
        .unwrap();
        assert_eq!(lex.weight_of("套牢"), Some(-1));
        assert_eq!(conflicts.len(), 1);
        match &conflicts[0] {
            MergeConflict::Weight {
                word,
                kept,
                dropped,
                ..
            } => {
                assert_eq!(word, "套牢");
                assert_eq!(*kept, -1);
                assert_eq!(*dropped, 1);
            }
            other => panic!("unexpected conflict {other:?}"),
        }
    }

    #[test]
    fn sum_sign_policy() {
        let (lex, _) = Lexicon::merge(
            &[
                source("a", &[("w", -1)], &[]),
                source("b", &[("w", 1)], &[]),
                source("c", &[("w", 1)], &[]),
            ],
            ConflictPolicy::SumSign,
        )
        .unwrap();
        assert_eq!(lex.weight_of("w"), Some(1));
    }

    #[test]
    fn empty_merge_is_fatal() {
        assert_eq!(
            Lexicon::merge(&[source("a", &[], &["不"])], ConflictPolicy::FirstWins).unwrap_err(),
            LexiconError::Empty
        );
    }

    #[test]
    fn negation_overlap_drops_weighted_entry() {
        let (lex, conflicts) = Lexicon::merge(
            &[source("a", &[("不", 1), ("涨", 1)], &["不"])],
            ConflictPolicy::FirstWins,
        )
        .unwrap();
        assert!(lex.is_negation("不"));
        assert_eq!(lex.weight_of("不"), None);
        assert!(matches!(
            conflicts[0],
            MergeConflict::NegationOverlap { .. }
        ));
    }

    fn tiny_lexicon() -> Lexicon {
        Lexicon::merge(
            &[source(
                "t",
                &[("ab", 1), ("a", 1), ("b", -1), ("涨停", 1), ("涨", 1)],
                &["不"],
            )],
            ConflictPolicy::FirstWins,
        )
        .unwrap()
        .0
    }

    #[test]
    fn segment_empty_input() {
        assert!(segment("", &tiny_lexicon()).is_empty());
    }

    #[test]
    fn segment_prefers_longest_match() {
        let lex = tiny_lexicon();
        assert_eq!(segment("ab", &lex), vec!["ab"]);
        assert_eq!(segment("ba", &lex), vec!["b", "a"]);
        assert_eq!(segment("涨停了", &lex), vec!["涨停", "了"]);
        assert_eq!(segment("不涨", &lex), vec!["不", "涨"]);
    }

    #[test]
    fn segment_falls_back_to_single_chars() {
        assert_eq!(segment("xy", &tiny_lexicon()), vec!["x", "y"]);
    }

    #[test]
    fn segment_round_trips_mixed_unicode() {
        let lex = tiny_lexicon();
        let text = "今天涨停了🚀 ab不b\tok";
        let tokens = segment(text, &lex);
        let joined: String = tokens.concat();
        assert_eq!(joined, text);
    }
}
