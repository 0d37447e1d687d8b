//! Causal NLL and the APO-down preference objective on a tabular policy.
//!
//! The toy policy stores one logit row per observed context (the previous
//! `n` token ids, boundary-padded), so log-probabilities, losses, and
//! gradients are exact and cheap to check against finite differences.
//!
//! The anchored preference objective minimized here is
//!
//! ```text
//! L = E[ sigmoid(r_w) - sigmoid(r_w - r_l) ]
//! r(prefix, target) = beta * (log pi_theta(target|prefix) - log pi_ref(target|prefix))
//! ```
//!
//! where `r_w` / `r_l` score the chosen / rejected speech tokens under the
//! shared `(text, plan)` prefix. The first term anchors the policy to the
//! reference on chosen sequences; the second grows the chosen-vs-rejected
//! margin. The loss is a difference of two sigmoids, so it always lies in
//! `(-1, 1)` and vanishes identically at `theta == ref`.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::pipeline::{PreferenceTuple, TokenSequence};

#[derive(Debug, Error)]
pub enum ApoError {
    #[error("vocabulary must have at least 2 tokens, got {0}")]
    VocabTooSmall(usize),
    #[error("context length must be at least 1")]
    ZeroContext,
    #[error("token id {id} is outside the vocabulary of size {vocab}")]
    TokenOutOfVocab { id: u32, vocab: usize },
    #[error("target sequence is empty")]
    EmptyTarget,
    #[error("sequence must have at least 2 tokens, got {0}")]
    SequenceTooShort(usize),
    #[error("loss mask selects no predictable position")]
    AllMasked,
    #[error("preference batch is empty")]
    EmptyBatch,
    #[error("tuple {index} has an empty {field} field")]
    EmptyTupleField { index: usize, field: &'static str },
    #[error("beta must be positive, got {0}")]
    InvalidBeta(f64),
    #[error("learning rate must be non-negative, got {0}")]
    InvalidLearningRate(f64),
    #[error("non-finite loss at step {step}")]
    NonFiniteLoss { step: usize },
}

/// Gradient values aligned with the policy's logit table.
pub type GradientTable = BTreeMap<Vec<u32>, Vec<f64>>;

/// Tabular autoregressive policy: a logit row per context of the previous
/// `context_len` tokens. Missing rows are implicitly uniform (all-zero
/// logits).
#[derive(Debug, Clone, PartialEq)]
pub struct ToyPolicy {
    vocab_size: usize,
    context_len: usize,
    table: BTreeMap<Vec<u32>, Vec<f64>>,
}

impl ToyPolicy {
    pub fn uniform(vocab_size: usize, context_len: usize) -> Result<Self, ApoError> {
        if vocab_size < 2 {
            return Err(ApoError::VocabTooSmall(vocab_size));
        }
        if context_len == 0 {
            return Err(ApoError::ZeroContext);
        }
        Ok(Self {
            vocab_size,
            context_len,
            table: BTreeMap::new(),
        })
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn context_len(&self) -> usize {
        self.context_len
    }

    /// Id used to left-pad contexts at the sequence boundary; sits just
    /// outside the vocabulary.
    pub fn boundary_id(&self) -> u32 {
        self.vocab_size as u32
    }

    pub fn parameters(&self) -> &BTreeMap<Vec<u32>, Vec<f64>> {
        &self.table
    }

    /// Sets one logit, materializing the context row if needed.
    pub fn set_logit(&mut self, context: &[u32], token: u32, value: f64) {
        let row = self
            .table
            .entry(context.to_vec())
            .or_insert_with(|| vec![0.0; self.vocab_size]);
        row[token as usize] = value;
    }

    /// Subtracts `step` from every logit in `updates` (gradient descent).
    pub fn apply_descent(&mut self, updates: &GradientTable, learning_rate: f64) {
        for (context, grad) in updates {
            let row = self
                .table
                .entry(context.clone())
                .or_insert_with(|| vec![0.0; self.vocab_size]);
            for (w, g) in row.iter_mut().zip(grad) {
                *w -= learning_rate * g;
            }
        }
    }

    fn logits(&self, context: &[u32]) -> Option<&[f64]> {
        self.table.get(context).map(Vec::as_slice)
    }

    /// `log softmax(logits(context))[token]`.
    fn log_prob(&self, context: &[u32], token: u32) -> f64 {
        match self.logits(context) {
            Some(row) => log_softmax_at(row, token as usize),
            None => -(self.vocab_size as f64).ln(),
        }
    }

    /// Softmax distribution for a context; uniform when unmaterialized.
    fn probs(&self, context: &[u32]) -> Vec<f64> {
        match self.logits(context) {
            Some(row) => softmax(row),
            None => vec![1.0 / self.vocab_size as f64; self.vocab_size],
        }
    }

    fn check_tokens(&self, tokens: &[u32]) -> Result<(), ApoError> {
        for &id in tokens {
            if id as usize >= self.vocab_size {
                return Err(ApoError::TokenOutOfVocab {
                    id,
                    vocab: self.vocab_size,
                });
            }
        }
        Ok(())
    }
}

fn log_softmax_at(logits: &[f64], index: usize) -> f64 {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln() + max;
    logits[index] - lse
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Context of the `context_len` tokens preceding position `i` of
/// `combined`, left-padded with the boundary id.
fn context_at(combined: &[u32], i: usize, context_len: usize, boundary: u32) -> Vec<u32> {
    let mut ctx = Vec::with_capacity(context_len);
    for k in 0..context_len {
        let offset = context_len - k;
        if i >= offset {
            ctx.push(combined[i - offset]);
        } else {
            ctx.push(boundary);
        }
    }
    ctx
}

/// Log-probability of `target` given `prefix`, summed over target
/// positions only (contexts slide across the concatenation).
pub fn sequence_logprob(
    policy: &ToyPolicy,
    prefix: &[u32],
    target: &[u32],
) -> Result<f64, ApoError> {
    if target.is_empty() {
        return Err(ApoError::EmptyTarget);
    }
    policy.check_tokens(prefix)?;
    policy.check_tokens(target)?;
    let combined: Vec<u32> = prefix.iter().chain(target).copied().collect();
    let mut total = 0.0;
    for (t, &token) in target.iter().enumerate() {
        let i = prefix.len() + t;
        let ctx = context_at(&combined, i, policy.context_len(), policy.boundary_id());
        total += policy.log_prob(&ctx, token);
    }
    Ok(total)
}

/// Mean negative log-likelihood over mask-true positions that have a
/// predecessor.
pub fn nll_loss(policy: &ToyPolicy, sequence: &TokenSequence) -> Result<f64, ApoError> {
    if sequence.len() < 2 {
        return Err(ApoError::SequenceTooShort(sequence.len()));
    }
    policy.check_tokens(&sequence.tokens)?;
    let mut total = 0.0;
    let mut count = 0usize;
    for i in 1..sequence.len() {
        if !sequence.loss_mask[i] {
            continue;
        }
        let ctx = context_at(
            &sequence.tokens,
            i,
            policy.context_len(),
            policy.boundary_id(),
        );
        total -= policy.log_prob(&ctx, sequence.tokens[i]);
        count += 1;
    }
    if count == 0 {
        return Err(ApoError::AllMasked);
    }
    Ok(total / count as f64)
}

/// `beta * (log pi_theta(target|prefix) - log pi_ref(target|prefix))`.
pub fn implicit_reward(
    theta: &ToyPolicy,
    reference: &ToyPolicy,
    prefix: &[u32],
    target: &[u32],
    beta: f64,
) -> Result<f64, ApoError> {
    if !(beta > 0.0) {
        return Err(ApoError::InvalidBeta(beta));
    }
    Ok(beta
        * (sequence_logprob(theta, prefix, target)?
            - sequence_logprob(reference, prefix, target)?))
}

fn tuple_rewards(
    theta: &ToyPolicy,
    reference: &ToyPolicy,
    tuple: &PreferenceTuple,
    index: usize,
    beta: f64,
) -> Result<(Vec<u32>, f64, f64), ApoError> {
    for (field, tokens) in [
        ("text", &tuple.text),
        ("plan", &tuple.plan),
        ("chosen", &tuple.chosen),
        ("rejected", &tuple.rejected),
    ] {
        if tokens.is_empty() {
            return Err(ApoError::EmptyTupleField { index, field });
        }
    }
    let prefix: Vec<u32> = tuple.text.iter().chain(&tuple.plan).copied().collect();
    let r_w = implicit_reward(theta, reference, &prefix, &tuple.chosen, beta)?;
    let r_l = implicit_reward(theta, reference, &prefix, &tuple.rejected, beta)?;
    Ok((prefix, r_w, r_l))
}

/// Batch-mean APO-down objective, `sigmoid(r_w) - sigmoid(r_w - r_l)`.
pub fn apo_down_loss(
    theta: &ToyPolicy,
    reference: &ToyPolicy,
    batch: &[PreferenceTuple],
    beta: f64,
) -> Result<f64, ApoError> {
    if batch.is_empty() {
        return Err(ApoError::EmptyBatch);
    }
    let mut total = 0.0;
    for (index, tuple) in batch.iter().enumerate() {
        let (_, r_w, r_l) = tuple_rewards(theta, reference, tuple, index, beta)?;
        total += sigmoid(r_w) - sigmoid(r_w - r_l);
    }
    Ok(total / batch.len() as f64)
}

/// Exact gradient of [`apo_down_loss`] with respect to every theta logit;
/// the reference policy is a constant. Contexts untouched by the batch do
/// not appear in the table.
pub fn apo_down_grad(
    theta: &ToyPolicy,
    reference: &ToyPolicy,
    batch: &[PreferenceTuple],
    beta: f64,
) -> Result<GradientTable, ApoError> {
    if batch.is_empty() {
        return Err(ApoError::EmptyBatch);
    }
    let mut grad: GradientTable = BTreeMap::new();
    let scale = 1.0 / batch.len() as f64;
    for (index, tuple) in batch.iter().enumerate() {
        let (prefix, r_w, r_l) = tuple_rewards(theta, reference, tuple, index, beta)?;
        // dL/dr_w and dL/dr_l for this tuple.
        let s_w = sigmoid(r_w);
        let s_m = sigmoid(r_w - r_l);
        let d_rw = s_w * (1.0 - s_w) - s_m * (1.0 - s_m);
        let d_rl = s_m * (1.0 - s_m);
        accumulate_path_grad(&mut grad, theta, &prefix, &tuple.chosen, scale * beta * d_rw);
        accumulate_path_grad(&mut grad, theta, &prefix, &tuple.rejected, scale * beta * d_rl);
    }
    Ok(grad)
}

/// Adds `coeff * d log pi_theta(target|prefix) / d logits` into `grad`;
/// per position the derivative is `delta(k = token) - softmax(k)`.
fn accumulate_path_grad(
    grad: &mut GradientTable,
    theta: &ToyPolicy,
    prefix: &[u32],
    target: &[u32],
    coeff: f64,
) {
    let combined: Vec<u32> = prefix.iter().chain(target).copied().collect();
    for (t, &token) in target.iter().enumerate() {
        let i = prefix.len() + t;
        let ctx = context_at(&combined, i, theta.context_len(), theta.boundary_id());
        let probs = theta.probs(&ctx);
        let row = grad
            .entry(ctx)
            .or_insert_with(|| vec![0.0; theta.vocab_size()]);
        for (k, p) in probs.iter().enumerate() {
            let indicator = f64::from(k as u32 == token);
            row[k] += coeff * (indicator - p);
        }
    }
}

/// Optimization settings for [`train_apo`].
#[derive(Debug, Clone, PartialEq)]
pub struct ApoConfig {
    pub beta: f64,
    pub learning_rate: f64,
    pub epochs: usize,
}

impl Default for ApoConfig {
    fn default() -> Self {
        Self {
            beta: 0.1,
            learning_rate: 1.0,
            epochs: 50,
        }
    }
}

/// Trained policy plus the loss before each step and after the last one
/// (`epochs + 1` entries).
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub policy: ToyPolicy,
    pub trace: Vec<f64>,
}

/// Full-batch gradient descent on the APO-down objective.
pub fn train_apo(
    theta: &ToyPolicy,
    reference: &ToyPolicy,
    data: &[PreferenceTuple],
    config: &ApoConfig,
) -> Result<TrainOutcome, ApoError> {
    if data.is_empty() {
        return Err(ApoError::EmptyBatch);
    }
    if !(config.beta > 0.0) {
        return Err(ApoError::InvalidBeta(config.beta));
    }
    if config.learning_rate < 0.0 {
        return Err(ApoError::InvalidLearningRate(config.learning_rate));
    }
    let mut policy = theta.clone();
    let mut trace = Vec::with_capacity(config.epochs + 1);
    for step in 0..config.epochs {
        let loss = apo_down_loss(&policy, reference, data, config.beta)?;
        if !loss.is_finite() {
            return Err(ApoError::NonFiniteLoss { step });
        }
        trace.push(loss);
        let grad = apo_down_grad(&policy, reference, data, config.beta)?;
        policy.apply_descent(&grad, config.learning_rate);
    }
    let final_loss = apo_down_loss(&policy, reference, data, config.beta)?;
    if !final_loss.is_finite() {
        return Err(ApoError::NonFiniteLoss {
            step: config.epochs,
        });
    }
    trace.push(final_loss);
    Ok(TrainOutcome { policy, trace })
}

/// Mean chosen-minus-rejected log-probability margin of a batch; training
/// should push this up.
pub fn preference_margin(
    policy: &ToyPolicy,
    batch: &[PreferenceTuple],
) -> Result<f64, ApoError> {
    if batch.is_empty() {
        return Err(ApoError::EmptyBatch);
    }
    let mut total = 0.0;
    for tuple in batch {
        let prefix: Vec<u32> = tuple.text.iter().chain(&tuple.plan).copied().collect();
        total += sequence_logprob(policy, &prefix, &tuple.chosen)?
            - sequence_logprob(policy, &prefix, &tuple.rejected)?;
    }
    Ok(total / batch.len() as f64)
}
