//! Mel-cepstral distortion between two signals.
//!
//! Each signal becomes a track of mel-cepstral coefficient vectors
//! (Hann window, power spectrum, triangular mel filterbank, log, DCT-II,
//! coefficients 1..=D with c0 dropped so overall gain is ignored). Tracks
//! are aligned by dynamic time warping under Euclidean frame distance with
//! the symmetric step set {diagonal, vertical, horizontal}, and
//!
//! ```text
//! MCD = (10 / ln 10) * sqrt(2) * mean aligned-pair distance  [dB]
//! ```
//!
//! where the mean is the optimal path cost divided by its length. Ties in
//! path cost resolve toward shorter paths, which keeps the measure
//! symmetric in its arguments.

use thiserror::Error;

use crate::audio_io::AudioBuffer;
use crate::dsp::{frame_signal, hann_window, DspError};

/// dB conversion constant in front of the aligned mean distance.
pub const MCD_SCALE: f64 = 6.141850952848364; // (10 / ln 10) * sqrt(2)

/// Default number of retained coefficients (excluding c0).
pub const DEFAULT_N_COEFFS: usize = 13;
/// Default mel filterbank size.
pub const DEFAULT_N_FILTERS: usize = 26;

const FRAME_MS: f64 = 25.0;
const HOP_MS: f64 = 10.0;
const LOG_FLOOR: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum McdError {
    #[error("need n_coeffs < n_filters, got {n_coeffs} >= {n_filters}")]
    InvalidCoeffCount { n_coeffs: usize, n_filters: usize },
    #[error("cepstral track is empty")]
    EmptyTrack,
    #[error("coefficient dimensions differ: {a} vs {b}")]
    DimensionMismatch { a: usize, b: usize },
    #[error("track frames have inconsistent dimensions")]
    RaggedTrack,
    #[error(transparent)]
    Dsp(#[from] DspError),
}

/// Mel-cepstral coefficients per frame, c0 excluded.
#[derive(Debug, Clone, PartialEq)]
pub struct CepstralTrack {
    pub frames: Vec<Vec<f64>>,
    pub frame_times: Vec<f64>,
}

impl CepstralTrack {
    pub fn new(frames: Vec<Vec<f64>>, frame_times: Vec<f64>) -> Result<Self, McdError> {
        if frames.is_empty() {
            return Err(McdError::EmptyTrack);
        }
        let dim = frames[0].len();
        if frames.iter().any(|f| f.len() != dim) || frames.len() != frame_times.len() {
            return Err(McdError::RaggedTrack);
        }
        Ok(Self {
            frames,
            frame_times,
        })
    }

    pub fn dim(&self) -> usize {
        self.frames.first().map_or(0, Vec::len)
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

/// Computes the mel-cepstral track of a buffer (25 ms frames, 10 ms hop).
pub fn mel_cepstrum(
    buffer: &AudioBuffer,
    n_coeffs: usize,
    n_filters: usize,
) -> Result<CepstralTrack, McdError> {
    if n_coeffs >= n_filters {
        return Err(McdError::InvalidCoeffCount {
            n_coeffs,
            n_filters,
        });
    }
    let sr = buffer.sample_rate();
    let frame_len = (FRAME_MS * sr as f64 / 1000.0).round() as usize;
    let hop = (HOP_MS * sr as f64 / 1000.0).round() as usize;
    if buffer.len() < frame_len {
        return Err(McdError::Dsp(DspError::BufferTooShort {
            need: frame_len,
            got: buffer.len(),
        }));
    }
    let frames = frame_signal(buffer, frame_len, hop)?;
    let filterbank = mel_filterbank(n_filters, frame_len, sr);
    let window = hann_window(frame_len);

    let mut out_frames = Vec::with_capacity(frames.len());
    let mut times = Vec::with_capacity(frames.len());
    let mut planner = rustfft::FftPlanner::new();
    let fft = planner.plan_fft_forward(frame_len);
    for frame in &frames {
        let mut data: Vec<rustfft::num_complex::Complex<f64>> = frame
            .samples
            .iter()
            .zip(&window)
            .map(|(s, w)| rustfft::num_complex::Complex::new(s * w, 0.0))
            .collect();
        fft.process(&mut data);
        let power: Vec<f64> = data[..=frame_len / 2].iter().map(|c| c.norm_sqr()).collect();
        let log_energies: Vec<f64> = filterbank
            .iter()
            .map(|filter| {
                let e: f64 = filter.iter().zip(&power).map(|(w, p)| w * p).sum();
                e.max(LOG_FLOOR).ln()
            })
            .collect();
        out_frames.push(dct_ii_ortho(&log_energies, n_coeffs));
        times.push(frame.center);
    }
    CepstralTrack::new(out_frames, times)
}

/// Triangular mel filters (HTK mel scale) spanning 0..Nyquist, one weight
/// vector per filter over the FFT bins.
fn mel_filterbank(n_filters: usize, frame_len: usize, sample_rate: u32) -> Vec<Vec<f64>> {
    let nyquist = sample_rate as f64 / 2.0;
    let mel_max = hz_to_mel(nyquist);
    let points: Vec<f64> = (0..n_filters + 2)
        .map(|i| mel_to_hz(mel_max * i as f64 / (n_filters + 1) as f64))
        .collect();
    let n_bins = frame_len / 2 + 1;
    let bin_hz = sample_rate as f64 / frame_len as f64;
    (0..n_filters)
        .map(|m| {
            let (lo, mid, hi) = (points[m], points[m + 1], points[m + 2]);
            (0..n_bins)
                .map(|k| {
                    let f = k as f64 * bin_hz;
                    if f <= lo || f >= hi {
                        0.0
                    } else if f <= mid {
                        (f - lo) / (mid - lo)
                    } else {
                        (hi - f) / (hi - mid)
                    }
                })
                .collect()
        })
        .collect()
}

fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Orthonormal DCT-II keeping coefficients 1..=n_coeffs.
fn dct_ii_ortho(input: &[f64], n_coeffs: usize) -> Vec<f64> {
    let m = input.len() as f64;
    (1..=n_coeffs)
        .map(|j| {
            let sum: f64 = input
                .iter()
                .enumerate()
                .map(|(i, &x)| {
                    x * (std::f64::consts::PI * j as f64 * (i as f64 + 0.5) / m).cos()
                })
                .sum();
            (2.0 / m).sqrt() * sum
        })
        .collect()
}

fn frame_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// DTW-aligned mel-cepstral distortion in dB.
pub fn mcd(track_a: &CepstralTrack, track_b: &CepstralTrack) -> Result<f64, McdError> {
    if track_a.is_empty() || track_b.is_empty() {
        return Err(McdError::EmptyTrack);
    }
    if track_a.dim() != track_b.dim() {
        return Err(McdError::DimensionMismatch {
            a: track_a.dim(),
            b: track_b.dim(),
        });
    }
    let (cost, len) = dtw_alignment(&track_a.frames, &track_b.frames);
    Ok(MCD_SCALE * cost / len as f64)
}

/// Minimum-cost monotone alignment; ties in cost break toward shorter
/// paths. Returns total cost and path length.
pub(crate) fn dtw_alignment(a: &[Vec<f64>], b: &[Vec<f64>]) -> (f64, usize) {
    let n = a.len();
    let m = b.len();
    let mut cost = vec![f64::INFINITY; n * m];
    let mut steps = vec![0usize; n * m];
    for i in 0..n {
        for j in 0..m {
            let d = frame_distance(&a[i], &b[j]);
            let idx = i * m + j;
            let mut best: Option<(f64, usize)> = None;
            if i == 0 && j == 0 {
                best = Some((0.0, 0));
            }
            for (pi, pj) in [(i.wrapping_sub(1), j.wrapping_sub(1)), (i.wrapping_sub(1), j), (i, j.wrapping_sub(1))] {
                if pi < n && pj < m && (pi, pj) != (i, j) {
                    let cand = (cost[pi * m + pj], steps[pi * m + pj]);
                    best = Some(match best {
                        None => cand,
                        Some(b) if cand < b => cand,
                        Some(b) => b,
                    });
                }
            }
            let (prev_cost, prev_steps) = best.expect("every cell has a predecessor");
            cost[idx] = prev_cost + d;
            steps[idx] = prev_steps + 1;
        }
    }
    (cost[n * m - 1], steps[n * m - 1])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testing::{sine, white_noise, SplitMix64};

    fn random_track(rng: &mut SplitMix64, frames: usize, dim: usize) -> CepstralTrack {
        let data: Vec<Vec<f64>> = (0..frames)
            .map(|_| (0..dim).map(|_| 4.0 * rng.next_f64() - 2.0).collect())
            .collect();
        let times: Vec<f64> = (0..frames).map(|i| i as f64 * 0.01).collect();
        CepstralTrack::new(data, times).unwrap()
    }

    #[test]
    fn identity_is_zero() {
        let mut rng = SplitMix64::new(1);
        let t = random_track(&mut rng, 20, 13);
        assert_eq!(mcd(&t, &t).unwrap(), 0.0);
    }

    #[test]
    fn constant_offset_closed_form() {
        let mut rng = SplitMix64::new(2);
        let a = random_track(&mut rng, 15, 13);
        let shifted: Vec<Vec<f64>> = a
            .frames
            .iter()
            .map(|f| {
                let mut v = f.clone();
                v[0] += 1.0;
                v
            })
            .collect();
        let b = CepstralTrack::new(shifted, a.frame_times.clone()).unwrap();
        let value = mcd(&a, &b).unwrap();
        assert!((value - MCD_SCALE).abs() < 1e-9, "mcd {value}");
        assert!((value - 6.142).abs() < 1e-3);
    }

    #[test]
    fn symmetric_in_arguments() {
        let mut rng = SplitMix64::new(3);
        for _ in 0..20 {
            let len_a = 5 + rng.next_below(10) as usize;
            let len_b = 5 + rng.next_below(10) as usize;
            let a = random_track(&mut rng, len_a, 6);
            let b = random_track(&mut rng, len_b, 6);
            let ab = mcd(&a, &b).unwrap();
            let ba = mcd(&b, &a).unwrap();
            assert!((ab - ba).abs() < 1e-12, "{ab} vs {ba}");
        }
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let mut rng = SplitMix64::new(4);
        let a = random_track(&mut rng, 5, 6);
        let b = random_track(&mut rng, 5, 7);
        assert!(matches!(
            mcd(&a, &b),
            Err(McdError::DimensionMismatch { a: 6, b: 7 })
        ));
    }

    /// Exhaustive monotone-path enumeration, minimizing (cost, length)
    /// lexicographically.
    fn brute_force_alignment(a: &[Vec<f64>], b: &[Vec<f64>]) -> (f64, usize) {
        fn recurse(
            a: &[Vec<f64>],
            b: &[Vec<f64>],
            i: usize,
            j: usize,
            cost: f64,
            len: usize,
            best: &mut (f64, usize),
        ) {
            let here = cost + frame_distance(&a[i], &b[j]);
            let here_len = len + 1;
            if i == a.len() - 1 && j == b.len() - 1 {
                if (here, here_len) < *best {
                    *best = (here, here_len);
                }
                return;
            }
            if i + 1 < a.len() && j + 1 < b.len() {
                recurse(a, b, i + 1, j + 1, here, here_len, best);
            }
            if i + 1 < a.len() {
                recurse(a, b, i + 1, j, here, here_len, best);
            }
            if j + 1 < b.len() {
                recurse(a, b, i, j + 1, here, here_len, best);
            }
        }
        let mut best = (f64::INFINITY, usize::MAX);
        recurse(a, b, 0, 0, 0.0, 0, &mut best);
        best
    }

    #[test]
    fn dtw_matches_brute_force_on_small_tracks() {
        let mut rng = SplitMix64::new(5);
        for _ in 0..20 {
            let n = 2 + rng.next_below(9) as usize;
            let m = 2 + rng.next_below(9) as usize;
            let a = random_track(&mut rng, n, 4);
            let b = random_track(&mut rng, m, 4);
            let dp = dtw_alignment(&a.frames, &b.frames);
            let brute = brute_force_alignment(&a.frames, &b.frames);
            assert!((dp.0 - brute.0).abs() < 1e-9, "cost {} vs {}", dp.0, brute.0);
            assert_eq!(dp.1, brute.1, "length");
        }
    }

    #[test]
    fn cepstrum_deterministic_and_gain_invariant() {
        let buf = white_noise(16000, 0.3, 0.5, 6);
        let a = mel_cepstrum(&buf, 13, 26).unwrap();
        let b = mel_cepstrum(&buf, 13, 26).unwrap();
        assert_eq!(a, b);

        let scaled = crate::audio_io::AudioBuffer::new(
            buf.samples().iter().map(|s| s * 0.5).collect(),
            16000,
        )
        .unwrap();
        let c = mel_cepstrum(&scaled, 13, 26).unwrap();
        for (fa, fc) in a.frames.iter().zip(&c.frames) {
            for (x, y) in fa.iter().zip(fc) {
                assert!((x - y).abs() < 1e-9, "{x} vs {y}");
            }
        }
    }

    #[test]
    fn tone_and_noise_differ_every_frame() {
        for seed in 0..5 {
            let tone = sine(16000, 0.2, 440.0, 0.5);
            let noise = white_noise(16000, 0.2, 0.5, seed);
            let a = mel_cepstrum(&tone, 13, 26).unwrap();
            let b = mel_cepstrum(&noise, 13, 26).unwrap();
            for (fa, fb) in a.frames.iter().zip(&b.frames) {
                assert!(frame_distance(fa, fb) > 1e-3);
            }
        }
    }

    #[test]
    fn invalid_coeff_count() {
        let buf = sine(16000, 0.1, 440.0, 0.5);
        assert!(matches!(
            mel_cepstrum(&buf, 26, 26),
            Err(McdError::InvalidCoeffCount { .. })
        ));
    }

    #[test]
    fn buffer_too_short() {
        let buf = crate::audio_io::AudioBuffer::new(vec![0.1; 10], 16000).unwrap();
        assert!(matches!(mel_cepstrum(&buf, 13, 26), Err(McdError::Dsp(_))));
    }
}
