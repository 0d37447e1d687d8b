//! Training-data machinery: WER and speaking-rate gates, token sequence
//! assembly for the pre-train and SFT stages, fixed-length packing, and
//! preference-tuple construction.
//!
//! Wire formats owned by this module:
//!
//! - corpus manifests and preference candidates as JSON-lines,
//! - packed chunks as length-prefixed binary records of little-endian
//!   `u32` token ids plus a loss-mask bitmap,
//! - preference tuples as JSON-lines.

mod manifest;
mod packing;
mod pref;
mod quality;
mod sequences;
mod tokenizer;
mod wer;

pub use manifest::{read_jsonl, BuildRecord, PrefRecord};
pub use packing::{pack_sequences, read_chunks, write_chunks, DEFAULT_CHUNK_LEN};
pub use pref::{
    build_pref_tuples, read_pref_tuples, write_pref_tuples, ChosenCandidate, PairingSummary,
    PreferenceTuple,
};
pub use quality::{classify_sample, RejectReason, SampleQuality, Thresholds, Verdict};
pub use sequences::{
    assemble_pretrain_sequence, assemble_sft_sequence, speech_only_mask, split_pretrain_sequence,
    split_sft_sequence, TokenSequence,
};
pub use tokenizer::{ByteTokenizer, SpecialTokens};
pub use wer::{compute_wer, normalize_text, speaking_rate};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("reference transcript is empty after normalization")]
    EmptyReference,
    #[error("duration must be positive, got {0}")]
    NonPositiveDuration(f64),
    #[error("thresholds must be positive")]
    InvalidThresholds,
    #[error("{0} tokens must not be empty")]
    EmptyInput(&'static str),
    #[error("token sequence and loss mask lengths differ ({tokens} vs {mask})")]
    LengthMismatch { tokens: usize, mask: usize },
    #[error("sequence {index} is {len} tokens long, exceeding the chunk length {chunk_len}")]
    OversizedSequence {
        index: usize,
        len: usize,
        chunk_len: usize,
    },
    #[error("chunk length must be positive")]
    ZeroChunkLen,
    #[error("sequence {index} contains the pad token")]
    PadTokenInInput { index: usize },
    #[error("malformed sequence: {0}")]
    MalformedSequence(String),
    #[error("token id {id} is not a decodable byte")]
    UndecodableToken { id: u32 },
    #[error("decoded bytes are not valid UTF-8: {0}")]
    InvalidUtf8(#[from] std::string::FromUtf8Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed record on line {line}: {source}")]
    JsonLine {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
}
