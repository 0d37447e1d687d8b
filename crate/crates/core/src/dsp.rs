//! Frame-level analysis primitives.
//!
//! A signal is cut into overlapping frames (25 ms / 10 ms hop by default)
//! and each frame is reduced to three descriptors:
//!
//! - RMS energy: `sqrt(mean(x^2))` on the raw frame.
//! - Spectral centroid: magnitude-weighted mean frequency of the
//!   Hann-windowed spectrum, `None` for near-silent frames.
//! - Fundamental frequency: peak of the normalized cross-correlation over
//!   the lag range `[sr/f_max, sr/f_min]`, refined by parabolic
//!   interpolation, `None` when the peak falls below the voicing threshold.
//!
//! The correlation at lag `tau` is normalized by the energies of the two
//! overlapping windows, `r(tau) = sum(x[i] x[i+tau]) / sqrt(E0 * E_tau)`,
//! which makes the estimate invariant to amplitude scaling. A lag is only
//! searched when the frame holds two full periods of the candidate
//! (`tau <= n/2`), so the effective floor of the search range rises on
//! short frames.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use thiserror::Error;

use crate::audio_io::AudioBuffer;

/// Total spectral magnitude below which a frame is treated as silent and
/// the centroid is reported absent.
pub const CENTROID_SILENCE_FLOOR: f64 = 1e-6;

/// A half-lag peak at least this strong relative to the best peak wins
/// the octave decision in its favor.
const SUBHARMONIC_RATIO: f64 = 0.93;

#[derive(Debug, Error)]
pub enum DspError {
    #[error("frame is empty")]
    EmptyFrame,
    #[error("frame length {frame_len} exceeds buffer length {buffer_len}")]
    FrameLongerThanBuffer { frame_len: usize, buffer_len: usize },
    #[error("invalid framing: hop {hop} must satisfy 0 < hop <= frame_len {frame_len}")]
    InvalidFraming { frame_len: usize, hop: usize },
    #[error("invalid f0 range [{f_min}, {f_max}] at {sample_rate} Hz (need 0 < f_min < f_max < sr/2)")]
    InvalidF0Range {
        f_min: f64,
        f_max: f64,
        sample_rate: f64,
    },
    #[error("frame of {n} samples is too short to search for f0 down to {f_max} Hz")]
    FrameTooShort { n: usize, f_max: f64 },
    #[error("buffer too short: need at least {need} samples, got {got}")]
    BufferTooShort { need: usize, got: usize },
}

/// Parameters for [`analyze`]. Defaults are standard speech settings.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisConfig {
    pub frame_ms: f64,
    pub hop_ms: f64,
    pub f_min: f64,
    pub f_max: f64,
    pub voicing_threshold: f64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            frame_ms: 25.0,
            hop_ms: 10.0,
            f_min: 50.0,
            f_max: 500.0,
            voicing_threshold: 0.3,
        }
    }
}

impl AnalysisConfig {
    pub fn frame_len(&self, sample_rate: u32) -> usize {
        (self.frame_ms * sample_rate as f64 / 1000.0).round() as usize
    }

    pub fn hop(&self, sample_rate: u32) -> usize {
        (self.hop_ms * sample_rate as f64 / 1000.0).round() as usize
    }
}

/// A single analysis frame borrowed from the source buffer.
#[derive(Debug, Clone, Copy)]
pub struct Frame<'a> {
    /// Center time of the frame in seconds.
    pub center: f64,
    pub samples: &'a [f64],
}

/// Aligned per-frame series produced by [`analyze`].
///
/// `f0_hz` and `centroid_hz` are `None` for unvoiced / near-silent frames.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameTrack {
    pub frame_times: Vec<f64>,
    pub f0_hz: Vec<Option<f64>>,
    pub rms: Vec<f64>,
    pub centroid_hz: Vec<Option<f64>>,
}

impl FrameTrack {
    pub fn new(
        frame_times: Vec<f64>,
        f0_hz: Vec<Option<f64>>,
        rms: Vec<f64>,
        centroid_hz: Vec<Option<f64>>,
    ) -> Result<Self, DspError> {
        let n = frame_times.len();
        if f0_hz.len() != n || rms.len() != n || centroid_hz.len() != n {
            return Err(DspError::EmptyFrame);
        }
        Ok(Self {
            frame_times,
            f0_hz,
            rms,
            centroid_hz,
        })
    }

    pub fn len(&self) -> usize {
        self.frame_times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frame_times.is_empty()
    }
}

/// Cuts a buffer into full frames: frame `i` covers samples
/// `[i*hop, i*hop + frame_len)`, center time `(i*hop + frame_len/2) / sr`.
pub fn frame_signal(
    buffer: &AudioBuffer,
    frame_len: usize,
    hop: usize,
) -> Result<Vec<Frame<'_>>, DspError> {
    let n = buffer.len();
    if hop == 0 || hop > frame_len {
        return Err(DspError::InvalidFraming { frame_len, hop });
    }
    if frame_len > n {
        return Err(DspError::FrameLongerThanBuffer {
            frame_len,
            buffer_len: n,
        });
    }
    let count = (n - frame_len) / hop + 1;
    let sr = buffer.sample_rate() as f64;
    let samples = buffer.samples();
    Ok((0..count)
        .map(|i| Frame {
            center: (i * hop) as f64 / sr + frame_len as f64 / 2.0 / sr,
            samples: &samples[i * hop..i * hop + frame_len],
        })
        .collect())
}

/// Root-mean-square amplitude of a frame.
pub fn frame_rms(frame: &[f64]) -> Result<f64, DspError> {
    if frame.is_empty() {
        return Err(DspError::EmptyFrame);
    }
    let sum_sq: f64 = frame.iter().map(|s| s * s).sum();
    Ok((sum_sq / frame.len() as f64).sqrt())
}

/// Periodic Hann window of length `n`.
pub fn hann_window(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos())
        .collect()
}

/// Magnitude spectrum of the Hann-windowed frame over bins `0..=n/2`.
pub fn magnitude_spectrum(frame: &[f64]) -> Vec<f64> {
    let n = frame.len();
    let window = hann_window(n);
    let mut data: Vec<Complex<f64>> = frame
        .iter()
        .zip(&window)
        .map(|(s, w)| Complex::new(s * w, 0.0))
        .collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n).process(&mut data);
    data[..=n / 2].iter().map(|c| c.norm()).collect()
}

/// Magnitude-weighted mean frequency, or `None` when the total magnitude
/// is below [`CENTROID_SILENCE_FLOOR`].
pub fn spectral_centroid(frame: &[f64], sample_rate: u32) -> Result<Option<f64>, DspError> {
    if frame.is_empty() {
        return Err(DspError::EmptyFrame);
    }
    let mags = magnitude_spectrum(frame);
    Ok(centroid_of_magnitudes(&mags, frame.len(), sample_rate))
}

fn centroid_of_magnitudes(mags: &[f64], frame_len: usize, sample_rate: u32) -> Option<f64> {
    let total: f64 = mags.iter().sum();
    if total < CENTROID_SILENCE_FLOOR {
        return None;
    }
    let bin_hz = sample_rate as f64 / frame_len as f64;
    let weighted: f64 = mags
        .iter()
        .enumerate()
        .map(|(k, m)| k as f64 * bin_hz * m)
        .sum();
    Some(weighted / total)
}

/// Estimates the fundamental frequency of one frame by normalized
/// autocorrelation, or `None` when the frame is unvoiced.
pub fn estimate_f0(
    frame: &[f64],
    sample_rate: u32,
    f_min: f64,
    f_max: f64,
    voicing_threshold: f64,
) -> Result<Option<f64>, DspError> {
    let n = frame.len();
    if n == 0 {
        return Err(DspError::EmptyFrame);
    }
    let sr = sample_rate as f64;
    if !(f_min > 0.0 && f_min < f_max && f_max < sr / 2.0) {
        return Err(DspError::InvalidF0Range {
            f_min,
            f_max,
            sample_rate: sr,
        });
    }
    let lag_min = (sr / f_max).ceil() as usize;
    let lag_max = ((sr / f_min).floor() as usize).min(n / 2);
    if lag_min < 2 || lag_max < lag_min {
        return Err(DspError::FrameTooShort { n, f_max });
    }

    // One extra lag on each side for peak detection and the parabolic
    // refinement.
    let lo = lag_min - 1;
    let hi = (lag_max + 1).min(n - 1);
    let corr: Vec<f64> = (lo..=hi).map(|tau| normalized_corr(frame, tau)).collect();

    // Global correlation peak over the search range.
    let mut best_off = 1;
    for off in 1..corr.len() - 1 {
        let tau = lo + off;
        if tau >= lag_min && tau <= lag_max && corr[off] > corr[best_off] {
            best_off = off;
        }
    }
    if corr[best_off] < voicing_threshold {
        return Ok(None);
    }

    // A lag at an integer multiple of the true period can out-correlate
    // the period itself when the period falls between integer lags, so
    // walk down by halving while the half-lag peak is nearly as strong.
    loop {
        let half = (lo + best_off) / 2;
        if half < lag_min {
            break;
        }
        let cand = (half.saturating_sub(1)..=half + 1)
            .filter(|&t| t >= lag_min && t <= lag_max)
            .max_by(|&a, &b| corr[a - lo].total_cmp(&corr[b - lo]));
        let Some(cand) = cand else { break };
        let (_, r_best) = refine_peak(&corr, best_off, lo);
        let (_, r_half) = refine_peak(&corr, cand - lo, lo);
        if r_half >= SUBHARMONIC_RATIO * r_best {
            best_off = cand - lo;
        } else {
            break;
        }
    }

    let (tau_refined, _) = refine_peak(&corr, best_off, lo);
    Ok(Some(sr / tau_refined))
}

/// Parabolic vertex through a local maximum and its neighbors, returning
/// the refined lag and peak height (capped at the theoretical maximum 1).
fn refine_peak(corr: &[f64], off: usize, lo: usize) -> (f64, f64) {
    let tau = (lo + off) as f64;
    let (rl, rc, rr) = (corr[off - 1], corr[off], corr[off + 1]);
    let denom = rl - 2.0 * rc + rr;
    if denom >= -1e-12 {
        return (tau, rc);
    }
    let delta = (0.5 * (rl - rr) / denom).clamp(-0.5, 0.5);
    let height = (rc - 0.25 * (rl - rr) * delta).min(1.0);
    (tau + delta, height)
}

/// Cross-correlation at lag `tau`, normalized by the energy of the two
/// overlapping windows.
fn normalized_corr(frame: &[f64], tau: usize) -> f64 {
    let n = frame.len();
    debug_assert!(tau < n);
    let head = &frame[..n - tau];
    let tail = &frame[tau..];
    let dot: f64 = head.iter().zip(tail).map(|(a, b)| a * b).sum();
    let e_head: f64 = head.iter().map(|s| s * s).sum();
    let e_tail: f64 = tail.iter().map(|s| s * s).sum();
    let denom = (e_head * e_tail).sqrt();
    if denom <= 0.0 {
        0.0
    } else {
        dot / denom
    }
}

/// Runs framing plus per-frame RMS, centroid, and F0 over a whole buffer.
pub fn analyze(buffer: &AudioBuffer, config: &AnalysisConfig) -> Result<FrameTrack, DspError> {
    let frame_len = config.frame_len(buffer.sample_rate());
    let hop = config.hop(buffer.sample_rate());
    if buffer.len() < frame_len {
        return Err(DspError::BufferTooShort {
            need: frame_len,
            got: buffer.len(),
        });
    }
    let frames = frame_signal(buffer, frame_len, hop)?;
    let mut times = Vec::with_capacity(frames.len());
    let mut f0 = Vec::with_capacity(frames.len());
    let mut rms = Vec::with_capacity(frames.len());
    let mut centroid = Vec::with_capacity(frames.len());
    for frame in &frames {
        times.push(frame.center);
        rms.push(frame_rms(frame.samples)?);
        centroid.push(spectral_centroid(frame.samples, buffer.sample_rate())?);
        f0.push(estimate_f0(
            frame.samples,
            buffer.sample_rate(),
            config.f_min,
            config.f_max,
            config.voicing_threshold,
        )?);
    }
    FrameTrack::new(times, f0, rms, centroid)
}
