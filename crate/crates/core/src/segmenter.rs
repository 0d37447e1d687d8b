//! Merges word-level timestamps into prosodically analyzable segments.
//!
//! Words are accumulated left to right; a segment closes as soon as its
//! span (first word start to current word end, pauses included) exceeds
//! the threshold. A trailing remainder at or below the threshold is folded
//! into the previous segment so no unstable short segment survives, except
//! when the whole utterance is shorter than the threshold.

use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SegmentError {
    #[error("empty word list")]
    EmptyWordList,
    #[error("merge threshold must be positive, got {0}")]
    InvalidThreshold(f64),
    #[error("invalid word at index {index}: {reason}")]
    InvalidWord { index: usize, reason: String },
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed word timestamp on line {line}: {source}")]
    Json {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
}

/// A single word with its aligned time span.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordTimestamp {
    pub word: String,
    pub start: f64,
    pub end: f64,
}

/// A run of consecutive words treated as one prosodic unit.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub words: Vec<WordTimestamp>,
    pub start: f64,
    pub end: f64,
}

impl Segment {
    fn from_words(words: Vec<WordTimestamp>) -> Self {
        let start = words.first().expect("non-empty segment").start;
        let end = words.last().expect("non-empty segment").end;
        Self { words, start, end }
    }

    pub fn duration(&self) -> f64 {
        self.end - self.start
    }

    /// Segment words joined by single spaces.
    pub fn joined_words(&self) -> String {
        self.words
            .iter()
            .map(|w| w.word.as_str())
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// Validates the word-list invariants: each word spans positive time and
/// the list is sorted and non-overlapping.
pub fn validate_words(words: &[WordTimestamp]) -> Result<(), SegmentError> {
    for (i, w) in words.iter().enumerate() {
        if !(w.start.is_finite() && w.end.is_finite()) {
            return Err(SegmentError::InvalidWord {
                index: i,
                reason: "non-finite timestamp".into(),
            });
        }
        if w.start >= w.end {
            return Err(SegmentError::InvalidWord {
                index: i,
                reason: format!("start {} not before end {}", w.start, w.end),
            });
        }
        if i > 0 && words[i - 1].end > w.start {
            return Err(SegmentError::InvalidWord {
                index: i,
                reason: format!(
                    "overlaps previous word (prev end {} > start {})",
                    words[i - 1].end,
                    w.start
                ),
            });
        }
    }
    Ok(())
}

/// Greedy left-to-right merge: close a segment once its duration exceeds
/// `threshold`; fold a sub-threshold trailing remainder into the previous
/// segment when one exists.
pub fn merge_words(
    words: &[WordTimestamp],
    threshold: f64,
) -> Result<Vec<Segment>, SegmentError> {
    if words.is_empty() {
        return Err(SegmentError::EmptyWordList);
    }
    if !(threshold > 0.0) {
        return Err(SegmentError::InvalidThreshold(threshold));
    }
    validate_words(words)?;

    let mut segments: Vec<Segment> = Vec::new();
    let mut current: Vec<WordTimestamp> = Vec::new();
    let mut current_start = 0.0;
    for word in words {
        if current.is_empty() {
            current_start = word.start;
        }
        current.push(word.clone());
        if word.end - current_start > threshold {
            segments.push(Segment::from_words(std::mem::take(&mut current)));
        }
    }
    if !current.is_empty() {
        // The loop closes as soon as a segment exceeds the threshold, so a
        // trailing open run is always at or below it.
        match segments.last_mut() {
            Some(prev) => {
                prev.end = current.last().expect("non-empty remainder").end;
                prev.words.append(&mut current);
            }
            None => segments.push(Segment::from_words(current)),
        }
    }
    Ok(segments)
}

/// Reads word timestamps from a JSON-lines file, one object per line.
pub fn read_words_jsonl(path: impl AsRef<Path>) -> Result<Vec<WordTimestamp>, SegmentError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| SegmentError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_words_jsonl(std::io::BufReader::new(file))
}

/// Parses word timestamps from JSON-lines text, validating the list
/// invariants.
pub fn parse_words_jsonl(reader: impl BufRead) -> Result<Vec<WordTimestamp>, SegmentError> {
    let mut words = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|source| SegmentError::Io {
            path: "<reader>".into(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let word: WordTimestamp =
            serde_json::from_str(&line).map_err(|source| SegmentError::Json {
                line: i + 1,
                source,
            })?;
        words.push(word);
    }
    validate_words(&words)?;
    Ok(words)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn w(word: &str, start: f64, end: f64) -> WordTimestamp {
        WordTimestamp {
            word: word.into(),
            start,
            end,
        }
    }

    #[test]
    fn worked_example_two_segments() {
        let words = vec![
            w("a", 0.00, 0.40),
            w("b", 0.50, 0.80),
            w("c", 0.90, 1.30),
            w("d", 1.40, 2.60),
        ];
        let segments = merge_words(&words, 1.0).unwrap();
        assert_eq!(segments.len(), 2);
        assert_eq!(segments[0].words.len(), 3);
        assert_eq!((segments[0].start, segments[0].end), (0.00, 1.30));
        assert_eq!(segments[1].words.len(), 1);
        assert_eq!((segments[1].start, segments[1].end), (1.40, 2.60));
    }

    #[test]
    fn single_short_word_stands_alone() {
        let segments = merge_words(&[w("hi", 0.0, 0.5)], 1.0).unwrap();
        assert_eq!(segments.len(), 1);
        assert!((segments[0].duration() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn trailing_remainder_merges_back() {
        let words = vec![w("a", 0.0, 1.2), w("b", 1.3, 1.6)];
        let segments = merge_words(&words, 1.0).unwrap();
        assert_eq!(segments.len(), 1);
        assert_eq!((segments[0].start, segments[0].end), (0.0, 1.6));
        assert_eq!(segments[0].words.len(), 2);
    }

    #[test]
    fn empty_list_is_an_error() {
        assert!(matches!(
            merge_words(&[], 1.0),
            Err(SegmentError::EmptyWordList)
        ));
    }

    #[test]
    fn overlapping_words_rejected() {
        let words = vec![w("a", 0.0, 0.6), w("b", 0.5, 0.9)];
        assert!(matches!(
            merge_words(&words, 1.0),
            Err(SegmentError::InvalidWord { index: 1, .. })
        ));
    }

    #[test]
    fn jsonl_roundtrip() {
        let text = "{\"word\":\"hello\",\"start\":0.0,\"end\":0.4}\n\n{\"word\":\"there\",\"start\":0.5,\"end\":0.9}\n";
        let words = parse_words_jsonl(text.as_bytes()).unwrap();
        assert_eq!(words.len(), 2);
        assert_eq!(words[1].word, "there");
    }

    fn random_words(seed: u64, n: usize) -> Vec<WordTimestamp> {
        let mut rng = crate::testing::SplitMix64::new(seed);
        let mut t = 0.0;
        (0..n)
            .map(|i| {
                t += rng.next_f64() * 0.3;
                let start = t;
                t += 0.05 + rng.next_f64() * 0.8;
                w(&format!("w{i}"), start, t)
            })
            .collect()
    }

    proptest! {
        #[test]
        fn partition_property(seed in 0u64..2000, n in 1usize..40, thr in 0.2f64..3.0) {
            let words = random_words(seed, n);
            let segments = merge_words(&words, thr).unwrap();
            let flat: Vec<WordTimestamp> = segments.iter().flat_map(|s| s.words.clone()).collect();
            prop_assert_eq!(flat, words);
        }

        #[test]
        fn non_sole_segments_exceed_threshold(seed in 0u64..2000, n in 1usize..40, thr in 0.2f64..3.0) {
            let words = random_words(seed, n);
            let segments = merge_words(&words, thr).unwrap();
            if segments.len() > 1 {
                for s in &segments {
                    prop_assert!(s.duration() > thr, "segment {:?} too short", s.duration());
                }
            }
            for s in &segments {
                prop_assert_eq!(s.start, s.words.first().unwrap().start);
                prop_assert_eq!(s.end, s.words.last().unwrap().end);
            }
        }

        #[test]
        fn deterministic(seed in 0u64..500, n in 1usize..30) {
            let words = random_words(seed, n);
            let a = merge_words(&words, 1.0).unwrap();
            let b = merge_words(&words, 1.0).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
