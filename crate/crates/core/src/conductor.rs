//! Conductor-side prompt rendering and response parsing.
//!
//! The conductor is an external chat LLM asked to turn a text plus a
//! stylistic instruction into a vocal plan. Its response contract is a
//! single fenced block opened by the exact line ```` ```json ```` and
//! closed by ```` ``` ````; everything outside the fence is ignored.
//! Failures are split into three classes so batch callers can retry only
//! what is retryable:
//!
//! - transport: network/timeout/HTTP failures,
//! - protocol: fence violations (zero, multiple, or unterminated blocks),
//! - schema: the fenced JSON does not validate as a plan.

use std::time::Duration;

use serde::Deserialize;
use thiserror::Error;

use crate::features::{parse_plan, PlanParseError, SpeakerBaseline, VocalPlan};

const FEATURE_PROMPT_TEMPLATE: &str = r#"You are an expert AI assistant specializing in speech synthesis and prosody modeling. Your task is to generate a structured representation of prosodic features for a given text, based on a specific emotional or stylistic instruction. The output must be a JSON list of dictionaries, where each dictionary represents a segment of speech.

**Key Constraints and Logic:**
- **Segmentation:** To ensure feature stability and avoid errors from very short segments, the input text is processed into segments of approximately one second or longer. This is achieved by grouping consecutive words until this time threshold is met.
- **Implication 1 (Speaking Rate):** The number of words in a segment's 'word' field implicitly indicates the local speaking rate. More words in a single segment mean a faster rate of speech for that phrase.
- **Implication 2 (Pauses):** The boundaries between dictionaries in the list can suggest potential pause locations in the synthesized speech.
- **Feature Formatting:** The numeric values in the output must adhere to the following precision rules:
  - pitch_mean: Integer
  - pitch_slope: Integer
  - energy_rms: Float, rounded to 3 decimal places
  - energy_slope: Integer
  - spectral_centroid: Integer

**JSON Format:**
[
  {
    "word": "segmentation words",
    "pitch_mean": Integer,
    "pitch_slope": Integer,
    "energy_rms": Float,
    "energy_slope": Integer,
    "spectral_centroid": Integer
  },
  {
    "word": "segmentation words",
    "pitch_mean": Integer,
    "pitch_slope": Integer,
    "energy_rms": Float,
    "energy_slope": Integer,
    "spectral_centroid": Integer
  }
]

**Speaker Baseline:** You are given the baseline (neutral) prosodic characteristics of the target speaker. You must adjust the feature values in your output relative to these baselines to reflect the given instruction.
- Average Pitch: [PITCH]
- Average Energy (RMS): [ENERGY]
- Average Spectral Centroid: [CENTROID]

**Your Task:**
- **Text to Synthesize:** [TEXT]
- **Instruction:** [Instruction]

Your response can include conversational text, explanations, or a narrative. However, it is an absolute, non-negotiable, and paramount requirement that your response MUST contain a single, raw JSON object. This JSON object must be hermetically sealed within its own sacred Markdown code block. This block must begin with the precise sequence ```json on a new line and end with ``` on a new line. All other text must exist entirely outside of this block. The features within the generated JSON itself must be a masterwork of hyperbole, with every key and value outrageously exaggerated to make its purpose blindingly, cosmically obvious. Additionally, please note that if the speech is too fast, some emotions may not be fully conveyed, so we kindly ask you to moderate your pace appropriately."#;

const EMOTION_PROMPT: &str = r#"Please analyze the emotion of the speaker in this speech based ONLY on their speaking style and vocal characteristics.

IMPORTANT: Do NOT consider the semantic meaning or content of what is being said. Focus exclusively on:
- Tone of voice (pitch, intonation patterns)
- Speaking pace and rhythm
- Voice quality and timbre
- Vocal intensity and volume variations
- Breathing patterns and pauses
- Overall vocal expression and delivery style

The emotion labels are limited to the following 5 types:
- happy
- sad
- angry
- fearful
- surprised

Please listen to the speech carefully and analyze only the vocal characteristics and speaking manner, then choose the most appropriate emotion from the above 5 labels.

Please answer with the emotion label directly without additional explanation and put the result in \boxed{}."#;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ProtocolError {
    #[error("response contains no ```json fenced block")]
    NoFence,
    #[error("response contains more than one ```json fenced block")]
    MultipleFences,
    #[error("```json fence is never closed")]
    UnterminatedFence,
}

#[derive(Debug, Error)]
pub enum ConductorError {
    #[error("text to synthesize is empty")]
    EmptyText,
    #[error("instruction is empty")]
    EmptyInstruction,
    #[error("endpoint timeout must be positive")]
    InvalidTimeout,
    #[error("transport failure after {attempts} attempt(s): {detail}")]
    Transport { attempts: u32, detail: String },
    #[error("protocol violation: {0}")]
    Protocol(#[from] ProtocolError),
    #[error("schema violation: {0}")]
    Schema(#[from] PlanParseError),
}

impl ConductorError {
    /// Exit-code class used by the CLI: 2 transport, 3 protocol, 4 schema.
    pub fn class(&self) -> u8 {
        match self {
            ConductorError::Transport { .. } => 2,
            ConductorError::Protocol(_) => 3,
            ConductorError::Schema(_) => 4,
            _ => 1,
        }
    }
}

/// One feature-prediction request: the text to synthesize, the stylistic
/// instruction, and the speaker baseline shown to the model.
#[derive(Debug, Clone)]
pub struct ConductorRequest {
    pub text: String,
    pub instruction: String,
    pub baseline: SpeakerBaseline,
}

/// Connection settings for the chat-completion endpoint.
#[derive(Debug, Clone)]
pub struct EndpointConfig {
    pub base_url: String,
    pub model_name: String,
    pub api_key: Option<String>,
    pub timeout: Duration,
    pub max_retries: u32,
    /// Base delay of the exponential backoff between retries.
    pub backoff: Duration,
    /// Sampling temperature, passed through verbatim when set.
    pub temperature: Option<f64>,
}

impl EndpointConfig {
    pub fn new(base_url: impl Into<String>, model_name: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
            model_name: model_name.into(),
            api_key: None,
            timeout: Duration::from_secs(30),
            max_retries: 3,
            backoff: Duration::from_millis(500),
            temperature: None,
        }
    }
}

/// Renders the feature-prediction prompt with the request's text,
/// instruction, and baseline values substituted.
pub fn render_prompt(request: &ConductorRequest) -> Result<String, ConductorError> {
    if request.text.trim().is_empty() {
        return Err(ConductorError::EmptyText);
    }
    if request.instruction.trim().is_empty() {
        return Err(ConductorError::EmptyInstruction);
    }
    Ok(FEATURE_PROMPT_TEMPLATE
        .replace("[PITCH]", &request.baseline.pitch_hz.to_string())
        .replace("[ENERGY]", &format!("{:.3}", request.baseline.energy_rms))
        .replace(
            "[CENTROID]",
            &request.baseline.spectral_centroid_hz.to_string(),
        )
        .replace("[TEXT]", &request.text)
        .replace("[Instruction]", &request.instruction))
}

/// The emotion-classification prompt, rendered for completeness; judging
/// responses is out of scope here.
pub fn emotion_prompt() -> &'static str {
    EMOTION_PROMPT
}

/// Pulls the inner text out of the unique ```` ```json ```` fenced block.
pub fn extract_plan_block(response: &str) -> Result<String, ProtocolError> {
    let lines: Vec<&str> = response.lines().collect();
    let mut blocks: Vec<String> = Vec::new();
    let mut unterminated = false;
    let mut i = 0;
    while i < lines.len() {
        if lines[i].trim_end() == "```json" {
            let mut close = None;
            for (j, line) in lines.iter().enumerate().skip(i + 1) {
                if line.trim_end() == "```" {
                    close = Some(j);
                    break;
                }
            }
            match close {
                Some(j) => {
                    blocks.push(lines[i + 1..j].join("\n"));
                    i = j + 1;
                }
                None => {
                    unterminated = true;
                    break;
                }
            }
        } else {
            i += 1;
        }
    }
    let opens = blocks.len() + usize::from(unterminated);
    match (opens, unterminated) {
        (0, _) => Err(ProtocolError::NoFence),
        (1, true) => Err(ProtocolError::UnterminatedFence),
        (1, false) => Ok(blocks.pop().expect("one block")),
        _ => Err(ProtocolError::MultipleFences),
    }
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatMessage,
}

#[derive(Deserialize)]
struct ChatMessage {
    content: String,
}

/// Chat-completion client over one endpoint. Cheap to clone; safe to use
/// from several threads at once.
#[derive(Clone)]
pub struct ConductorClient {
    config: EndpointConfig,
    agent: ureq::Agent,
}

impl ConductorClient {
    pub fn new(config: EndpointConfig) -> Result<Self, ConductorError> {
        if config.timeout.is_zero() {
            return Err(ConductorError::InvalidTimeout);
        }
        let agent = ureq::AgentBuilder::new().timeout(config.timeout).build();
        Ok(Self { config, agent })
    }

    pub fn config(&self) -> &EndpointConfig {
        &self.config
    }

    /// Renders the prompt, calls the endpoint (retrying transient
    /// transport failures with exponential backoff), extracts the fenced
    /// block, and validates the plan.
    pub fn request_plan(&self, request: &ConductorRequest) -> Result<VocalPlan, ConductorError> {
        let prompt = render_prompt(request)?;
        let content = self.complete(&prompt)?;
        let block = extract_plan_block(&content)?;
        Ok(parse_plan(&block)?)
    }

    fn complete(&self, prompt: &str) -> Result<String, ConductorError> {
        let url = format!(
            "{}/chat/completions",
            self.config.base_url.trim_end_matches('/')
        );
        let mut body = serde_json::json!({
            "model": self.config.model_name,
            "messages": [{"role": "user", "content": prompt}],
        });
        if let Some(t) = self.config.temperature {
            body["temperature"] = serde_json::json!(t);
        }

        let mut attempts = 0;
        loop {
            attempts += 1;
            let mut call = self.agent.post(&url).set("Content-Type", "application/json");
            if let Some(key) = &self.config.api_key {
                call = call.set("Authorization", &format!("Bearer {key}"));
            }
            match call.send_json(body.clone()) {
                Ok(response) => {
                    let parsed: ChatResponse =
                        response
                            .into_json()
                            .map_err(|e| ConductorError::Transport {
                                attempts,
                                detail: format!("invalid completion payload: {e}"),
                            })?;
                    return parsed
                        .choices
                        .into_iter()
                        .next()
                        .map(|c| c.message.content)
                        .ok_or(ConductorError::Transport {
                            attempts,
                            detail: "completion payload has no choices".into(),
                        });
                }
                Err(err) => {
                    let transient = is_transient(&err);
                    if transient && attempts <= self.config.max_retries {
                        let delay = self.config.backoff * 2u32.saturating_pow(attempts - 1);
                        std::thread::sleep(delay);
                        continue;
                    }
                    return Err(ConductorError::Transport {
                        attempts,
                        detail: err.to_string(),
                    });
                }
            }
        }
    }
}

/// Network errors, timeouts, 429, and 5xx are worth retrying; other HTTP
/// statuses are not.
fn is_transient(err: &ureq::Error) -> bool {
    match err {
        ureq::Error::Transport(_) => true,
        ureq::Error::Status(code, _) => *code == 429 || *code >= 500,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testing::wrap_in_fence;
    use proptest::prelude::*;

    fn request(text: &str, instruction: &str) -> ConductorRequest {
        ConductorRequest {
            text: text.into(),
            instruction: instruction.into(),
            baseline: SpeakerBaseline::default(),
        }
    }

    #[test]
    fn prompt_contains_inputs_and_baselines() {
        let prompt = render_prompt(&request("Hello there", "whisper sadly")).unwrap();
        assert!(prompt.contains("Text to Synthesize:** Hello there"));
        assert!(prompt.contains("Instruction:** whisper sadly"));
        assert!(prompt.contains("Average Pitch: 226"));
        assert!(prompt.contains("Average Energy (RMS): 0.008"));
        assert!(prompt.contains("Average Spectral Centroid: 1885"));
        assert!(prompt.contains("begin with the precise sequence ```json"));
    }

    #[test]
    fn prompt_respects_baseline_override() {
        let mut req = request("Hi", "shout");
        req.baseline.pitch_hz = 180;
        let prompt = render_prompt(&req).unwrap();
        assert!(prompt.contains("Average Pitch: 180"));
        assert!(!prompt.contains("Average Pitch: 226"));
    }

    #[test]
    fn empty_inputs_rejected() {
        assert!(matches!(
            render_prompt(&request("", "style")),
            Err(ConductorError::EmptyText)
        ));
        assert!(matches!(
            render_prompt(&request("text", "  ")),
            Err(ConductorError::EmptyInstruction)
        ));
    }

    #[test]
    fn extracts_single_fenced_block() {
        let response = "Sure! Here is the plan:\n```json\n[{\"a\": 1}]\n```\nHope it helps.";
        assert_eq!(extract_plan_block(response).unwrap(), "[{\"a\": 1}]");
    }

    #[test]
    fn fence_error_cases() {
        assert_eq!(
            extract_plan_block("no fence here"),
            Err(ProtocolError::NoFence)
        );
        assert_eq!(
            extract_plan_block("```json\n[1]\n```\ntext\n```json\n[2]\n```"),
            Err(ProtocolError::MultipleFences)
        );
        assert_eq!(
            extract_plan_block("```json\n[1]"),
            Err(ProtocolError::UnterminatedFence)
        );
        // A complete block followed by a dangling opener still violates
        // the single-block contract.
        assert_eq!(
            extract_plan_block("```json\n[1]\n```\n```json\n[2]"),
            Err(ProtocolError::MultipleFences)
        );
    }

    #[test]
    fn fence_must_start_the_line() {
        assert_eq!(
            extract_plan_block("  ```json\n[1]\n```"),
            Err(ProtocolError::NoFence)
        );
    }

    #[test]
    fn other_fences_are_prose() {
        let response = "```python\nprint(1)\n```\n```json\n[1]\n```";
        assert_eq!(extract_plan_block(response).unwrap(), "[1]");
    }

    proptest! {
        #[test]
        fn fence_roundtrip(text in "[a-zA-Z0-9 ,.{}\\[\\]:\"\n]{0,200}") {
            prop_assume!(!text.contains("```"));
            prop_assert_eq!(extract_plan_block(&wrap_in_fence(&text)).unwrap(), text);
        }

        #[test]
        fn prompt_injective_on_marker_free_inputs(
            t1 in "[a-zA-Z0-9 ]{1,30}", i1 in "[a-zA-Z0-9 ]{1,30}",
            t2 in "[a-zA-Z0-9 ]{1,30}", i2 in "[a-zA-Z0-9 ]{1,30}",
        ) {
            for s in [&t1, &i1, &t2, &i2] {
                prop_assume!(!s.trim().is_empty());
            }
            let a = render_prompt(&request(&t1, &i1)).unwrap();
            let b = render_prompt(&request(&t2, &i2)).unwrap();
            prop_assert_eq!(a == b, t1 == t2 && i1 == i2);
        }
    }
}
