//! WAV loading and the canonical in-memory audio representation.
//!
//! Everything downstream operates on [`AudioBuffer`]: mono `f64` samples in
//! `[-1, 1]` at the file's native rate. Multi-channel input is averaged to
//! mono; no resampling is performed.

use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum AudioError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("unsupported wav encoding in {path}: {detail} (expected 16-bit PCM or 32-bit float)")]
    UnsupportedEncoding { path: String, detail: String },
    #[error("malformed wav file {path}: {detail}")]
    Malformed { path: String, detail: String },
    #[error("audio stream is empty")]
    Empty,
    #[error("sample rate must be positive")]
    ZeroSampleRate,
    #[error("non-finite sample at index {0}")]
    NonFinite(usize),
}

/// Mono audio at a fixed sample rate, samples in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl AudioBuffer {
    /// Builds a buffer, enforcing the type invariants: non-empty, finite
    /// samples, positive sample rate.
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self, AudioError> {
        if sample_rate == 0 {
            return Err(AudioError::ZeroSampleRate);
        }
        if samples.is_empty() {
            return Err(AudioError::Empty);
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(AudioError::NonFinite(i));
        }
        Ok(Self { samples, sample_rate })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Sample count divided by sample rate.
    pub fn duration_seconds(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

/// Loads a PCM WAV file (16-bit integer or 32-bit float) as mono audio.
///
/// Integer samples are scaled by `1/32768`; multi-channel frames are
/// averaged; float samples are clamped to `[-1, 1]`.
pub fn load_wav(path: impl AsRef<Path>) -> Result<AudioBuffer, AudioError> {
    let path = path.as_ref();
    let path_str = path.display().to_string();
    let reader = hound::WavReader::open(path).map_err(|e| map_hound(e, &path_str))?;
    let spec = reader.spec();

    let samples: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Int, 16) => reader
            .into_samples::<i16>()
            .map(|s| s.map(|v| f64::from(v) / 32768.0))
            .collect::<Result<_, _>>()
            .map_err(|e| map_hound(e, &path_str))?,
        (hound::SampleFormat::Float, 32) => reader
            .into_samples::<f32>()
            .map(|s| s.map(|v| f64::from(v).clamp(-1.0, 1.0)))
            .collect::<Result<_, _>>()
            .map_err(|e| map_hound(e, &path_str))?,
        (fmt, bits) => {
            return Err(AudioError::UnsupportedEncoding {
                path: path_str,
                detail: format!("{bits}-bit {fmt:?}"),
            })
        }
    };

    let channels = spec.channels as usize;
    if channels == 0 {
        return Err(AudioError::Malformed {
            path: path_str,
            detail: "zero channels".into(),
        });
    }
    let mono = if channels == 1 {
        samples
    } else {
        samples
            .chunks(channels)
            .map(|frame| frame.iter().sum::<f64>() / frame.len() as f64)
            .collect()
    };

    AudioBuffer::new(mono, spec.sample_rate)
}

/// Writes a buffer as 16-bit PCM WAV. Round-trips with [`load_wav`] to
/// within one LSB.
pub fn write_wav_i16(path: impl AsRef<Path>, buffer: &AudioBuffer) -> Result<(), AudioError> {
    let path = path.as_ref();
    let path_str = path.display().to_string();
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: buffer.sample_rate(),
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut writer = hound::WavWriter::create(path, spec).map_err(|e| map_hound(e, &path_str))?;
    for &s in buffer.samples() {
        let q = (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        writer.write_sample(q).map_err(|e| map_hound(e, &path_str))?;
    }
    writer.finalize().map_err(|e| map_hound(e, &path_str))
}

fn map_hound(err: hound::Error, path: &str) -> AudioError {
    match err {
        hound::Error::IoError(source) => AudioError::Io {
            path: path.to_string(),
            source,
        },
        hound::Error::Unsupported => AudioError::UnsupportedEncoding {
            path: path.to_string(),
            detail: "unsupported format".into(),
        },
        other => AudioError::Malformed {
            path: path.to_string(),
            detail: other.to_string(),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_raw_i16(path: &Path, rate: u32, channels: u16, samples: &[i16]) {
        let spec = hound::WavSpec {
            channels,
            sample_rate: rate,
            bits_per_sample: 16,
            sample_format: hound::SampleFormat::Int,
        };
        let mut w = hound::WavWriter::create(path, spec).unwrap();
        for &s in samples {
            w.write_sample(s).unwrap();
        }
        w.finalize().unwrap();
    }

    #[test]
    fn pcm16_scaling() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("mono.wav");
        write_raw_i16(&path, 16000, 1, &[0, 16384, -16384]);
        let buf = load_wav(&path).unwrap();
        assert_eq!(buf.sample_rate(), 16000);
        let expect = [0.0, 0.5, -0.5];
        for (got, want) in buf.samples().iter().zip(expect) {
            assert!((got - want).abs() < 1e-4, "{got} vs {want}");
        }
    }

    #[test]
    fn stereo_averages_to_mono() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("stereo.wav");
        write_raw_i16(&path, 8000, 2, &[32767, 0]);
        let buf = load_wav(&path).unwrap();
        assert_eq!(buf.len(), 1);
        assert!((buf.samples()[0] - 0.5).abs() < 1e-3);
    }

    #[test]
    fn empty_data_chunk_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.wav");
        write_raw_i16(&path, 16000, 1, &[]);
        assert!(matches!(load_wav(&path), Err(AudioError::Empty)));
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(
            load_wav("/definitely/not/here.wav"),
            Err(AudioError::Io { .. })
        ));
    }

    #[test]
    fn float32_wav_loads() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f32.wav");
        let spec = hound::WavSpec {
            channels: 1,
            sample_rate: 22050,
            bits_per_sample: 32,
            sample_format: hound::SampleFormat::Float,
        };
        let mut w = hound::WavWriter::create(&path, spec).unwrap();
        for s in [0.25f32, -0.75, 1.5] {
            w.write_sample(s).unwrap();
        }
        w.finalize().unwrap();
        let buf = load_wav(&path).unwrap();
        assert_eq!(buf.samples(), &[0.25, -0.75, 1.0]);
    }

    #[test]
    fn unsupported_bit_depth_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("i32.wav");
        let spec = hound::WavSpec {
            channels: 1,
            sample_rate: 16000,
            bits_per_sample: 32,
            sample_format: hound::SampleFormat::Int,
        };
        let mut w = hound::WavWriter::create(&path, spec).unwrap();
        w.write_sample(1i32 << 20).unwrap();
        w.finalize().unwrap();
        assert!(matches!(
            load_wav(&path),
            Err(AudioError::UnsupportedEncoding { .. })
        ));
    }

    #[test]
    fn duration_arithmetic() {
        let buf = AudioBuffer::new(vec![0.0; 16000], 16000).unwrap();
        assert_eq!(buf.duration_seconds(), 1.0);
        let buf = AudioBuffer::new(vec![0.0; 8000], 16000).unwrap();
        assert_eq!(buf.duration_seconds(), 0.5);
        let buf = AudioBuffer::new(vec![0.0; 1], 16000).unwrap();
        assert!((buf.duration_seconds() - 6.25e-5).abs() < 1e-12);
    }

    #[test]
    fn duration_additive_under_concat() {
        let a = AudioBuffer::new(vec![0.1; 1234], 16000).unwrap();
        let b = AudioBuffer::new(vec![-0.1; 4321], 16000).unwrap();
        let mut joined = a.samples().to_vec();
        joined.extend_from_slice(b.samples());
        let c = AudioBuffer::new(joined, 16000).unwrap();
        assert!((c.duration_seconds() - (a.duration_seconds() + b.duration_seconds())).abs() < 1e-12);
    }

    #[test]
    fn nonfinite_sample_rejected() {
        assert!(matches!(
            AudioBuffer::new(vec![0.0, f64::NAN], 16000),
            Err(AudioError::NonFinite(1))
        ));
    }

    #[test]
    fn roundtrip_within_one_lsb() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rt.wav");
        let samples: Vec<f64> = (0..1000)
            .map(|i| ((i as f64 * 0.735).sin() * 0.9).clamp(-1.0, 1.0))
            .collect();
        let buf = AudioBuffer::new(samples, 16000).unwrap();
        write_wav_i16(&path, &buf).unwrap();
        let back = load_wav(&path).unwrap();
        assert_eq!(back.len(), buf.len());
        for (a, b) in buf.samples().iter().zip(back.samples()) {
            assert!((a - b).abs() <= 1.0 / 32768.0);
        }
    }
}
