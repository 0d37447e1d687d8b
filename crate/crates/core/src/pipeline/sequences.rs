//! Training-sequence assembly for the pre-train and SFT stages.
//!
//! Pre-train sequences are `[BOS, x, SEP, S, EOS]`; SFT sequences insert
//! the verbalized plan as `[BOS, x, SEP, F_v, SEP, S, EOS]`. The loss mask
//! is true on every position with a predecessor, matching a next-token
//! objective over the whole sequence. [`speech_only_mask`] derives the
//! variant that restricts the loss to the speech span.

use serde::{Deserialize, Serialize};

use super::{PipelineError, SpecialTokens};

/// Token ids with an aligned loss mask.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSequence {
    pub tokens: Vec<u32>,
    pub loss_mask: Vec<bool>,
}

impl TokenSequence {
    pub fn new(tokens: Vec<u32>, loss_mask: Vec<bool>) -> Result<Self, PipelineError> {
        if tokens.len() != loss_mask.len() {
            return Err(PipelineError::LengthMismatch {
                tokens: tokens.len(),
                mask: loss_mask.len(),
            });
        }
        Ok(Self { tokens, loss_mask })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// `[BOS, text, SEP, speech, EOS]` with the full next-token loss mask.
pub fn assemble_pretrain_sequence(
    text_tokens: &[u32],
    speech_tokens: &[u32],
    specials: &SpecialTokens,
) -> Result<TokenSequence, PipelineError> {
    if text_tokens.is_empty() {
        return Err(PipelineError::EmptyInput("text"));
    }
    if speech_tokens.is_empty() {
        return Err(PipelineError::EmptyInput("speech"));
    }
    let mut tokens = Vec::with_capacity(text_tokens.len() + speech_tokens.len() + 3);
    tokens.push(specials.bos);
    tokens.extend_from_slice(text_tokens);
    tokens.push(specials.sep);
    tokens.extend_from_slice(speech_tokens);
    tokens.push(specials.eos);
    let mut loss_mask = vec![true; tokens.len()];
    loss_mask[0] = false; // BOS has no predecessor
    TokenSequence::new(tokens, loss_mask)
}

/// `[BOS, text, SEP, plan, SEP, speech, EOS]` with the full next-token
/// loss mask.
pub fn assemble_sft_sequence(
    text_tokens: &[u32],
    plan_tokens: &[u32],
    speech_tokens: &[u32],
    specials: &SpecialTokens,
) -> Result<TokenSequence, PipelineError> {
    if text_tokens.is_empty() {
        return Err(PipelineError::EmptyInput("text"));
    }
    if plan_tokens.is_empty() {
        return Err(PipelineError::EmptyInput("plan"));
    }
    if speech_tokens.is_empty() {
        return Err(PipelineError::EmptyInput("speech"));
    }
    let mut tokens =
        Vec::with_capacity(text_tokens.len() + plan_tokens.len() + speech_tokens.len() + 4);
    tokens.push(specials.bos);
    tokens.extend_from_slice(text_tokens);
    tokens.push(specials.sep);
    tokens.extend_from_slice(plan_tokens);
    tokens.push(specials.sep);
    tokens.extend_from_slice(speech_tokens);
    tokens.push(specials.eos);
    let mut loss_mask = vec![true; tokens.len()];
    loss_mask[0] = false;
    TokenSequence::new(tokens, loss_mask)
}

/// Recovers `(text, speech)` from a pre-train sequence.
pub fn split_pretrain_sequence(
    seq: &TokenSequence,
    specials: &SpecialTokens,
) -> Result<(Vec<u32>, Vec<u32>), PipelineError> {
    let parts = split_on_specials(seq, specials, 1)?;
    Ok((parts[0].clone(), parts[1].clone()))
}

/// Recovers `(text, plan, speech)` from an SFT sequence.
pub fn split_sft_sequence(
    seq: &TokenSequence,
    specials: &SpecialTokens,
) -> Result<(Vec<u32>, Vec<u32>, Vec<u32>), PipelineError> {
    let parts = split_on_specials(seq, specials, 2)?;
    Ok((parts[0].clone(), parts[1].clone(), parts[2].clone()))
}

fn split_on_specials(
    seq: &TokenSequence,
    specials: &SpecialTokens,
    expected_seps: usize,
) -> Result<Vec<Vec<u32>>, PipelineError> {
    let t = &seq.tokens;
    if t.len() < 3 || t[0] != specials.bos || *t.last().unwrap() != specials.eos {
        return Err(PipelineError::MalformedSequence(
            "sequence must be framed by BOS .. EOS".into(),
        ));
    }
    let inner = &t[1..t.len() - 1];
    let parts: Vec<Vec<u32>> = inner
        .split(|&id| id == specials.sep)
        .map(|s| s.to_vec())
        .collect();
    if parts.len() != expected_seps + 1 {
        return Err(PipelineError::MalformedSequence(format!(
            "expected {} separator(s), found {}",
            expected_seps,
            parts.len() - 1
        )));
    }
    if parts.iter().any(Vec::is_empty) {
        return Err(PipelineError::MalformedSequence("empty part".into()));
    }
    Ok(parts)
}

/// Copy of the sequence whose loss covers only the positions after the
/// final separator (speech tokens and EOS).
pub fn speech_only_mask(
    seq: &TokenSequence,
    specials: &SpecialTokens,
) -> Result<TokenSequence, PipelineError> {
    let last_sep = seq
        .tokens
        .iter()
        .rposition(|&id| id == specials.sep)
        .ok_or_else(|| PipelineError::MalformedSequence("no separator".into()))?;
    let mut masked = seq.clone();
    for flag in &mut masked.loss_mask[..=last_sep] {
        *flag = false;
    }
    Ok(masked)
}
