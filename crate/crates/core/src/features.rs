//! Per-segment vocal features and the plan JSON schema.
//!
//! A vocal plan is a JSON array of segment objects with a fixed key order
//! and fixed numeric formatting:
//!
//! ```json
//! [
//!   {
//!     "word": "segmentation words",
//!     "pitch_mean": 220,
//!     "pitch_slope": -12,
//!     "energy_rms": 0.008,
//!     "energy_slope": 3,
//!     "spectral_centroid": 1885
//!   }
//! ]
//! ```
//!
//! All fields are integers except `energy_rms`, which always renders with
//! exactly three decimal places. Slopes are least-squares fits over the
//! segment's frames; the energy slope is expressed in milli-RMS per second
//! so it survives integer rounding. Unvoiced segments use 0 Hz as the
//! pitch sentinel.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsp::FrameTrack;
use crate::segmenter::Segment;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("need at least 2 points for a slope, got {0}")]
    TooFewPoints(usize),
    #[error("times must be strictly increasing (violation at index {0})")]
    NonIncreasingTimes(usize),
    #[error("no frames fall inside segment [{start}, {end}]")]
    NoFramesInSegment { start: f64, end: f64 },
    #[error("plan has no segments")]
    EmptyPlan,
}

#[derive(Debug, Error)]
pub enum PlanParseError {
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("plan must be a JSON array")]
    NotAnArray,
    #[error("plan array is empty")]
    EmptyPlan,
    #[error("segment {index} is not an object")]
    NotAnObject { index: usize },
    #[error("segment {index} is missing key \"{key}\"")]
    MissingKey { index: usize, key: &'static str },
    #[error("segment {index} key \"{key}\" must be {expected}")]
    WrongKind {
        index: usize,
        key: &'static str,
        expected: &'static str,
    },
    #[error("segment {index} key \"{key}\" must be non-negative")]
    NegativeValue { index: usize, key: &'static str },
    #[error("segment {index} has an empty word field")]
    EmptyWord { index: usize },
}

/// Quantified prosody of one segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentFeatures {
    /// Space-joined words of the segment.
    pub word: String,
    /// Mean F0 in Hz, 0 for fully unvoiced segments.
    pub pitch_mean: i64,
    /// Least-squares F0 slope in Hz/s.
    pub pitch_slope: i64,
    /// Mean frame RMS, rounded to 3 decimals.
    pub energy_rms: f64,
    /// Least-squares RMS slope in milli-RMS per second.
    pub energy_slope: i64,
    /// Mean spectral centroid in Hz, 0 when absent throughout.
    pub spectral_centroid: i64,
}

/// Ordered segment features for a whole utterance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VocalPlan {
    pub segments: Vec<SegmentFeatures>,
}

/// Neutral prosodic characteristics of the target speaker, substituted
/// into the conductor prompt.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeakerBaseline {
    pub pitch_hz: i64,
    pub energy_rms: f64,
    pub spectral_centroid_hz: i64,
}

impl Default for SpeakerBaseline {
    fn default() -> Self {
        Self {
            pitch_hz: 226,
            energy_rms: 0.008,
            spectral_centroid_hz: 1885,
        }
    }
}

/// Rounds half away from zero to an integer.
pub fn round_int(x: f64) -> i64 {
    x.round() as i64
}

/// Rounds to 3 decimal places, half away from zero.
pub fn round3(x: f64) -> f64 {
    (x * 1000.0).round() / 1000.0
}

/// Ordinary least-squares slope of `values` against `times`.
pub fn linear_slope(times: &[f64], values: &[f64]) -> Result<f64, FeatureError> {
    if times.len() < 2 || values.len() < 2 {
        return Err(FeatureError::TooFewPoints(times.len().min(values.len())));
    }
    if let Some(i) = (1..times.len()).find(|&i| times[i] <= times[i - 1]) {
        return Err(FeatureError::NonIncreasingTimes(i));
    }
    let n = times.len().min(values.len());
    let t_mean = times[..n].iter().sum::<f64>() / n as f64;
    let v_mean = values[..n].iter().sum::<f64>() / n as f64;
    let mut cov = 0.0;
    let mut var = 0.0;
    for i in 0..n {
        let dt = times[i] - t_mean;
        cov += dt * (values[i] - v_mean);
        var += dt * dt;
    }
    Ok(cov / var)
}

/// Aggregates track frames inside `[segment.start, segment.end]` into
/// segment features.
pub fn segment_features(
    track: &FrameTrack,
    segment: &Segment,
) -> Result<SegmentFeatures, FeatureError> {
    let idx: Vec<usize> = track
        .frame_times
        .iter()
        .enumerate()
        .filter(|(_, &t)| t >= segment.start && t <= segment.end)
        .map(|(i, _)| i)
        .collect();
    if idx.is_empty() {
        return Err(FeatureError::NoFramesInSegment {
            start: segment.start,
            end: segment.end,
        });
    }

    let voiced: Vec<(f64, f64)> = idx
        .iter()
        .filter_map(|&i| track.f0_hz[i].map(|f| (track.frame_times[i], f)))
        .collect();
    let pitch_mean = if voiced.is_empty() {
        0
    } else {
        round_int(voiced.iter().map(|(_, f)| f).sum::<f64>() / voiced.len() as f64)
    };
    let pitch_slope = slope_or_zero(
        &voiced.iter().map(|(t, _)| *t).collect::<Vec<_>>(),
        &voiced.iter().map(|(_, f)| *f).collect::<Vec<_>>(),
    );

    let times: Vec<f64> = idx.iter().map(|&i| track.frame_times[i]).collect();
    let rms: Vec<f64> = idx.iter().map(|&i| track.rms[i]).collect();
    let energy_rms = round3(rms.iter().sum::<f64>() / rms.len() as f64);
    let energy_slope = round_int(1000.0 * raw_slope_or_zero(&times, &rms));

    let centroids: Vec<f64> = idx.iter().filter_map(|&i| track.centroid_hz[i]).collect();
    let spectral_centroid = if centroids.is_empty() {
        0
    } else {
        round_int(centroids.iter().sum::<f64>() / centroids.len() as f64)
    };

    Ok(SegmentFeatures {
        word: segment.joined_words(),
        pitch_mean,
        pitch_slope,
        energy_rms,
        energy_slope,
        spectral_centroid,
    })
}

fn raw_slope_or_zero(times: &[f64], values: &[f64]) -> f64 {
    linear_slope(times, values).unwrap_or(0.0)
}

fn slope_or_zero(times: &[f64], values: &[f64]) -> i64 {
    round_int(raw_slope_or_zero(times, values))
}

/// Renders a plan with the exact key order and numeric formatting of the
/// schema. `energy_rms` always carries three decimals.
pub fn serialize_plan(plan: &VocalPlan) -> Result<String, FeatureError> {
    if plan.segments.is_empty() {
        return Err(FeatureError::EmptyPlan);
    }
    let mut out = String::from("[\n");
    for (i, seg) in plan.segments.iter().enumerate() {
        let word = serde_json::to_string(&seg.word).expect("string serialization");
        out.push_str("  {\n");
        out.push_str(&format!("    \"word\": {word},\n"));
        out.push_str(&format!("    \"pitch_mean\": {},\n", seg.pitch_mean));
        out.push_str(&format!("    \"pitch_slope\": {},\n", seg.pitch_slope));
        out.push_str(&format!("    \"energy_rms\": {:.3},\n", seg.energy_rms));
        out.push_str(&format!("    \"energy_slope\": {},\n", seg.energy_slope));
        out.push_str(&format!(
            "    \"spectral_centroid\": {}\n",
            seg.spectral_centroid
        ));
        out.push_str(if i + 1 == plan.segments.len() {
            "  }\n"
        } else {
            "  },\n"
        });
    }
    out.push(']');
    Ok(out)
}

/// Parses and validates a plan. Key order and whitespace are free on
/// input; unknown keys are ignored; `energy_rms` is re-rounded to three
/// decimals.
pub fn parse_plan(text: &str) -> Result<VocalPlan, PlanParseError> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    let items = value.as_array().ok_or(PlanParseError::NotAnArray)?;
    if items.is_empty() {
        return Err(PlanParseError::EmptyPlan);
    }
    let mut segments = Vec::with_capacity(items.len());
    for (index, item) in items.iter().enumerate() {
        let obj = item
            .as_object()
            .ok_or(PlanParseError::NotAnObject { index })?;
        let word = require(obj, index, "word")?
            .as_str()
            .ok_or(PlanParseError::WrongKind {
                index,
                key: "word",
                expected: "a string",
            })?
            .to_string();
        if word.is_empty() {
            return Err(PlanParseError::EmptyWord { index });
        }
        let pitch_mean = integer_field(obj, index, "pitch_mean")?;
        if pitch_mean < 0 {
            return Err(PlanParseError::NegativeValue {
                index,
                key: "pitch_mean",
            });
        }
        let pitch_slope = integer_field(obj, index, "pitch_slope")?;
        let energy_value = require(obj, index, "energy_rms")?;
        let energy_rms = energy_value
            .as_f64()
            .ok_or(PlanParseError::WrongKind {
                index,
                key: "energy_rms",
                expected: "a number",
            })?;
        if energy_rms < 0.0 {
            return Err(PlanParseError::NegativeValue {
                index,
                key: "energy_rms",
            });
        }
        let energy_slope = integer_field(obj, index, "energy_slope")?;
        let spectral_centroid = integer_field(obj, index, "spectral_centroid")?;
        if spectral_centroid < 0 {
            return Err(PlanParseError::NegativeValue {
                index,
                key: "spectral_centroid",
            });
        }
        segments.push(SegmentFeatures {
            word,
            pitch_mean,
            pitch_slope,
            energy_rms: round3(energy_rms),
            energy_slope,
            spectral_centroid,
        });
    }
    Ok(VocalPlan { segments })
}

fn require<'a>(
    obj: &'a serde_json::Map<String, serde_json::Value>,
    index: usize,
    key: &'static str,
) -> Result<&'a serde_json::Value, PlanParseError> {
    obj.get(key).ok_or(PlanParseError::MissingKey { index, key })
}

/// Integer-kind check: JSON integers pass; floats pass only when they
/// carry no fractional part.
fn integer_field(
    obj: &serde_json::Map<String, serde_json::Value>,
    index: usize,
    key: &'static str,
) -> Result<i64, PlanParseError> {
    let value = require(obj, index, key)?;
    if let Some(v) = value.as_i64() {
        return Ok(v);
    }
    if let Some(f) = value.as_f64() {
        if f.fract() == 0.0 && f.abs() < 9.0e15 {
            return Ok(f as i64);
        }
    }
    Err(PlanParseError::WrongKind {
        index,
        key,
        expected: "an integer",
    })
}
