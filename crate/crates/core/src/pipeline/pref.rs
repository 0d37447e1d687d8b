//! Preference-tuple construction from chosen/rejected candidate pools.

use std::io::{BufRead, Write};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::{ByteTokenizer, PipelineError};

/// One preference example: prompt text tokens, the plan the chosen sample
/// was conditioned on, and the two speech-token sequences to rank.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreferenceTuple {
    pub text: Vec<u32>,
    pub plan: Vec<u32>,
    pub chosen: Vec<u32>,
    pub rejected: Vec<u32>,
}

/// A chosen candidate: the plan it was conditioned on plus its speech
/// tokens.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChosenCandidate {
    pub plan: Vec<u32>,
    pub speech: Vec<u32>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct PairingSummary {
    pub tuples: usize,
    pub unmatched_rejected: usize,
    pub unmatched_chosen: usize,
}

/// Pairs pools keyed by identical normalized text: one tuple per text
/// present in both, in chosen-pool order. Texts present in only one pool
/// are counted, not errors.
pub fn build_pref_tuples(
    rejected_pool: &IndexMap<String, Vec<u32>>,
    chosen_pool: &IndexMap<String, ChosenCandidate>,
) -> (Vec<PreferenceTuple>, PairingSummary) {
    let tokenizer = ByteTokenizer;
    let mut tuples = Vec::new();
    for (text, candidate) in chosen_pool {
        if let Some(rejected) = rejected_pool.get(text) {
            tuples.push(PreferenceTuple {
                text: tokenizer.encode(text),
                plan: candidate.plan.clone(),
                chosen: candidate.speech.clone(),
                rejected: rejected.clone(),
            });
        }
    }
    let summary = PairingSummary {
        tuples: tuples.len(),
        unmatched_rejected: rejected_pool
            .keys()
            .filter(|k| !chosen_pool.contains_key(*k))
            .count(),
        unmatched_chosen: chosen_pool.len() - tuples.len(),
    };
    (tuples, summary)
}

/// Writes tuples as JSON-lines.
pub fn write_pref_tuples(
    mut writer: impl Write,
    tuples: &[PreferenceTuple],
) -> Result<(), PipelineError> {
    for tuple in tuples {
        let line = serde_json::to_string(tuple)
            .map_err(|e| PipelineError::MalformedSequence(e.to_string()))?;
        writer.write_all(line.as_bytes())?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

/// Reads tuples from JSON-lines, validating that all four fields are
/// non-empty.
pub fn read_pref_tuples(reader: impl BufRead) -> Result<Vec<PreferenceTuple>, PipelineError> {
    let mut tuples = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let tuple: PreferenceTuple =
            serde_json::from_str(&line).map_err(|source| PipelineError::JsonLine {
                line: i + 1,
                source,
            })?;
        if tuple.text.is_empty()
            || tuple.plan.is_empty()
            || tuple.chosen.is_empty()
            || tuple.rejected.is_empty()
        {
            return Err(PipelineError::MalformedSequence(format!(
                "preference tuple on line {} has an empty field",
                i + 1
            )));
        }
        tuples.push(tuple);
    }
    Ok(tuples)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chosen(plan: &[u32], speech: &[u32]) -> ChosenCandidate {
        ChosenCandidate {
            plan: plan.to_vec(),
            speech: speech.to_vec(),
        }
    }

    #[test]
    fn intersection_pairs_and_counts_skips() {
        let mut rejected = IndexMap::new();
        rejected.insert("a".to_string(), vec![1, 2]);
        rejected.insert("b".to_string(), vec![3, 4]);
        rejected.insert("c".to_string(), vec![5, 6]);
        let mut chosen_pool = IndexMap::new();
        chosen_pool.insert("a".to_string(), chosen(&[10], &[11]));
        chosen_pool.insert("b".to_string(), chosen(&[20], &[21]));
        let (tuples, summary) = build_pref_tuples(&rejected, &chosen_pool);
        assert_eq!(tuples.len(), 2);
        assert_eq!(summary.tuples, 2);
        assert_eq!(summary.unmatched_rejected, 1);
        assert_eq!(summary.unmatched_chosen, 0);
    }

    #[test]
    fn empty_chosen_pool_yields_nothing() {
        let mut rejected = IndexMap::new();
        rejected.insert("a".to_string(), vec![1]);
        let (tuples, summary) = build_pref_tuples(&rejected, &IndexMap::new());
        assert!(tuples.is_empty());
        assert_eq!(summary.unmatched_rejected, 1);
    }

    #[test]
    fn fields_pass_through_unchanged() {
        let mut rejected = IndexMap::new();
        rejected.insert("hi there".to_string(), vec![7, 8, 9]);
        let mut chosen_pool = IndexMap::new();
        chosen_pool.insert("hi there".to_string(), chosen(&[40, 41], &[50]));
        let (tuples, _) = build_pref_tuples(&rejected, &chosen_pool);
        assert_eq!(tuples[0].plan, vec![40, 41]);
        assert_eq!(tuples[0].chosen, vec![50]);
        assert_eq!(tuples[0].rejected, vec![7, 8, 9]);
        assert_eq!(tuples[0].text, ByteTokenizer.encode("hi there"));
    }

    #[test]
    fn jsonl_roundtrip() {
        let tuples = vec![PreferenceTuple {
            text: vec![104, 105],
            plan: vec![1],
            chosen: vec![2, 3],
            rejected: vec![4],
        }];
        let mut bytes = Vec::new();
        write_pref_tuples(&mut bytes, &tuples).unwrap();
        let back = read_pref_tuples(bytes.as_slice()).unwrap();
        assert_eq!(back, tuples);
    }

    #[test]
    fn empty_field_rejected_on_read() {
        let line = "{\"text\":[1],\"plan\":[],\"chosen\":[2],\"rejected\":[3]}\n";
        assert!(read_pref_tuples(line.as_bytes()).is_err());
    }
}
