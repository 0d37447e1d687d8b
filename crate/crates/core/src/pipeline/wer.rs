//! Word error rate and speaking rate.

use super::PipelineError;

/// Lowercases, strips ASCII punctuation, and collapses whitespace.
pub fn normalize_text(text: &str) -> String {
    let stripped: String = text
        .chars()
        .filter(|c| !c.is_ascii_punctuation())
        .flat_map(|c| c.to_lowercase())
        .collect();
    stripped.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Word-level Levenshtein distance divided by the reference word count.
/// Both texts are normalized first. Insertions can push the value past 1.
pub fn compute_wer(reference: &str, hypothesis: &str) -> Result<f64, PipelineError> {
    let r = normalize_text(reference);
    let h = normalize_text(hypothesis);
    let r_words: Vec<&str> = r.split_whitespace().collect();
    if r_words.is_empty() {
        return Err(PipelineError::EmptyReference);
    }
    let h_words: Vec<&str> = h.split_whitespace().collect();
    let edits = levenshtein_words(&r_words, &h_words);
    Ok(edits as f64 / r_words.len() as f64)
}

// Two-row DP over word tokens.
fn levenshtein_words(a: &[&str], b: &[&str]) -> usize {
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut curr = vec![0usize; b.len() + 1];
    for (i, wa) in a.iter().enumerate() {
        curr[0] = i + 1;
        for (j, wb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(wa != wb);
            curr[j + 1] = sub.min(prev[j + 1] + 1).min(curr[j] + 1);
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    prev[b.len()]
}

/// Normalized word count divided by the duration in seconds.
pub fn speaking_rate(transcript: &str, duration_s: f64) -> Result<f64, PipelineError> {
    if !(duration_s > 0.0) {
        return Err(PipelineError::NonPositiveDuration(duration_s));
    }
    let words = normalize_text(transcript).split_whitespace().count();
    Ok(words as f64 / duration_s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Full-matrix DP oracle, kept independent of the rolling-array
    /// implementation above.
    pub(crate) fn wer_oracle(reference: &str, hypothesis: &str) -> f64 {
        let r = normalize_text(reference);
        let h = normalize_text(hypothesis);
        let a: Vec<&str> = r.split_whitespace().collect();
        let b: Vec<&str> = h.split_whitespace().collect();
        let mut dp = vec![vec![0usize; b.len() + 1]; a.len() + 1];
        for (i, row) in dp.iter_mut().enumerate() {
            row[0] = i;
        }
        for j in 0..=b.len() {
            dp[0][j] = j;
        }
        for i in 1..=a.len() {
            for j in 1..=b.len() {
                let cost = usize::from(a[i - 1] != b[j - 1]);
                dp[i][j] = (dp[i - 1][j - 1] + cost)
                    .min(dp[i - 1][j] + 1)
                    .min(dp[i][j - 1] + 1);
            }
        }
        dp[a.len()][b.len()] as f64 / a.len() as f64
    }

    #[test]
    fn identity_is_zero() {
        assert_eq!(compute_wer("the cat sat", "the cat sat").unwrap(), 0.0);
    }

    #[test]
    fn substitution_plus_deletion() {
        let wer = compute_wer("the cat sat", "the bat").unwrap();
        assert_eq!(wer, 2.0 / 3.0);
    }

    #[test]
    fn insertion_counts_against_reference() {
        assert_eq!(compute_wer("a b", "a x b").unwrap(), 0.5);
    }

    #[test]
    fn can_exceed_one() {
        assert!(compute_wer("a", "x y z").unwrap() > 1.0);
    }

    #[test]
    fn normalization_applies() {
        assert_eq!(compute_wer("The CAT, sat!", "the cat sat").unwrap(), 0.0);
        assert_eq!(normalize_text("Don't  stop!"), "dont stop");
    }

    #[test]
    fn empty_reference_is_error() {
        assert!(matches!(
            compute_wer("...", "something"),
            Err(PipelineError::EmptyReference)
        ));
    }

    #[test]
    fn rate_cases() {
        assert_eq!(
            speaking_rate("one two three four five six seven eight nine ten eleven twelve", 8.0)
                .unwrap(),
            1.5
        );
        assert_eq!(speaking_rate("a b c d e f", 5.0).unwrap(), 1.2);
        assert_eq!(speaking_rate("", 2.0).unwrap(), 0.0);
        assert!(matches!(
            speaking_rate("a", 0.0),
            Err(PipelineError::NonPositiveDuration(_))
        ));
    }

    fn words_text(ids: &[u8]) -> String {
        ids.iter()
            .map(|i| format!("w{i}"))
            .collect::<Vec<_>>()
            .join(" ")
    }

    proptest! {
        #[test]
        fn matches_full_matrix_oracle(
            a in proptest::collection::vec(0u8..8, 1..12),
            b in proptest::collection::vec(0u8..8, 0..12),
        ) {
            let r = words_text(&a);
            let h = words_text(&b);
            prop_assert_eq!(compute_wer(&r, &h).unwrap(), wer_oracle(&r, &h));
        }

        #[test]
        fn single_deletion_is_one_over_k(k in 1usize..15, drop in 0usize..15) {
            prop_assume!(drop < k);
            let words: Vec<String> = (0..k).map(|i| format!("w{i}")).collect();
            let reference = words.join(" ");
            let mut hyp = words.clone();
            hyp.remove(drop);
            let expected = 1.0 / k as f64;
            prop_assert_eq!(compute_wer(&reference, &hyp.join(" ")).unwrap(), expected);
        }
    }
}
