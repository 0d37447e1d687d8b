//! Quantitative vocal-plan tooling for controllable text-to-speech.
//!
//! The crate covers the data machinery around a conductor/orchestra TTS
//! split: extracting per-segment vocal features (pitch, energy, spectral
//! centroid) from audio, rendering and parsing the conductor prompt
//! protocol, building pre-train / SFT token sequences with fixed-length
//! packing, assembling preference tuples by rejection sampling, training
//! a toy policy with the APO-down objective, and scoring synthesis
//! fidelity with mel-cepstral distortion.
//!
//! Modules map one-to-one onto pipeline stages:
//!
//! - [`audio_io`]: WAV decoding into [`AudioBuffer`]
//! - [`dsp`]: framing, spectra, RMS, spectral centroid, F0 estimation
//! - [`segmenter`]: merging word timestamps into prosodic segments
//! - [`features`]: per-segment feature aggregation and the plan JSON schema
//! - [`conductor`]: prompt rendering and the fenced-JSON response protocol
//! - [`pipeline`]: WER, rejection rules, sequence assembly, token packing
//! - [`apo`]: causal NLL and APO-down preference loss on a tabular policy
//! - [`mcd`]: mel-cepstral distortion with DTW alignment

pub mod apo;
pub mod audio_io;
pub mod conductor;
pub mod dsp;
pub mod features;
pub mod mcd;
pub mod pipeline;
pub mod segmenter;
pub mod testing;

pub use audio_io::AudioBuffer;
pub use dsp::{AnalysisConfig, FrameTrack};
pub use features::{SegmentFeatures, SpeakerBaseline, VocalPlan};
pub use pipeline::{PreferenceTuple, SampleQuality, Thresholds, TokenSequence, Verdict};
pub use segmenter::{Segment, WordTimestamp};
