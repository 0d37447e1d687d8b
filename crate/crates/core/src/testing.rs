//! Deterministic signal synthesis and a scriptable mock chat endpoint.
//!
//! Shared by the crate's own tests, the CLI fixtures, and the benchmarks.
//! Everything here is seeded or closed-form so fixtures are byte-stable
//! across runs.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::thread::JoinHandle;
use std::time::Duration;

use crate::audio_io::AudioBuffer;

/// Pure sine tone at `freq` Hz.
pub fn sine(sample_rate: u32, duration_s: f64, freq: f64, amplitude: f64) -> AudioBuffer {
    let n = (duration_s * sample_rate as f64).round() as usize;
    let samples = (0..n)
        .map(|i| {
            let t = i as f64 / sample_rate as f64;
            amplitude * (2.0 * std::f64::consts::PI * freq * t).sin()
        })
        .collect();
    AudioBuffer::new(samples, sample_rate).expect("non-empty synthetic signal")
}

/// Linear chirp sweeping `f0 -> f1` over the duration. The instantaneous
/// frequency at time `t` is `f0 + (f1 - f0) * t / duration`.
pub fn chirp_linear(
    sample_rate: u32,
    duration_s: f64,
    f0: f64,
    f1: f64,
    amplitude: f64,
) -> AudioBuffer {
    let n = (duration_s * sample_rate as f64).round() as usize;
    let k = (f1 - f0) / duration_s;
    let samples = (0..n)
        .map(|i| {
            let t = i as f64 / sample_rate as f64;
            let phase = 2.0 * std::f64::consts::PI * (f0 * t + 0.5 * k * t * t);
            amplitude * phase.sin()
        })
        .collect();
    AudioBuffer::new(samples, sample_rate).expect("non-empty synthetic signal")
}

/// Uniform white noise in `[-amplitude, amplitude]` from a fixed seed.
pub fn white_noise(sample_rate: u32, duration_s: f64, amplitude: f64, seed: u64) -> AudioBuffer {
    let n = (duration_s * sample_rate as f64).round() as usize;
    let mut state = SplitMix64::new(seed);
    let samples = (0..n)
        .map(|_| amplitude * (2.0 * state.next_f64() - 1.0))
        .collect();
    AudioBuffer::new(samples, sample_rate).expect("non-empty synthetic signal")
}

/// SplitMix64 generator; enough randomness for test fixtures without
/// pulling an RNG dependency into the library.
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E3779B97F4A7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
        z ^ (z >> 31)
    }

    /// Uniform in `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    /// Uniform in `[0, bound)`.
    pub fn next_below(&mut self, bound: u64) -> u64 {
        self.next_u64() % bound
    }
}

/// One scripted reply from [`MockChatServer`].
#[derive(Debug, Clone)]
pub enum MockReply {
    /// 200 with a chat-completion body whose message content is the string.
    Content(String),
    /// Arbitrary HTTP status with an empty JSON body.
    Status(u16),
    /// Sleep before answering 200, to trip client timeouts.
    DelayedContent(Duration, String),
}

/// Minimal single-threaded HTTP server that plays back scripted replies
/// to chat-completion POSTs, one connection per reply.
pub struct MockChatServer {
    pub base_url: String,
    handle: Option<JoinHandle<usize>>,
}

impl MockChatServer {
    pub fn start(replies: Vec<MockReply>) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").expect("bind mock server");
        let base_url = format!("http://{}", listener.local_addr().unwrap());
        let handle = std::thread::spawn(move || {
            let mut served = 0;
            // Each connection is answered on its own thread so a delayed
            // reply cannot stall later requests behind it.
            let mut workers = Vec::new();
            for reply in replies {
                let (mut stream, _) = match listener.accept() {
                    Ok(conn) => conn,
                    Err(_) => break,
                };
                served += 1;
                workers.push(std::thread::spawn(move || {
                    let _ = read_http_request(&mut stream);
                    let (status, body) = match reply {
                        MockReply::Content(text) => (200, completion_body(&text)),
                        MockReply::Status(code) => (code, "{}".to_string()),
                        MockReply::DelayedContent(delay, text) => {
                            std::thread::sleep(delay);
                            (200, completion_body(&text))
                        }
                    };
                    let reason = if status == 200 { "OK" } else { "Error" };
                    let response = format!(
                        "HTTP/1.1 {status} {reason}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                        body.len()
                    );
                    let _ = stream.write_all(response.as_bytes());
                }));
            }
            for worker in workers {
                let _ = worker.join();
            }
            served
        });
        Self {
            base_url,
            handle: Some(handle),
        }
    }

    /// Waits for the server thread and returns how many requests it served.
    pub fn finish(mut self) -> usize {
        self.handle
            .take()
            .expect("finish called once")
            .join()
            .expect("mock server thread")
    }
}

fn completion_body(content: &str) -> String {
    serde_json::json!({
        "choices": [{"message": {"role": "assistant", "content": content}}]
    })
    .to_string()
}

fn read_http_request(stream: &mut std::net::TcpStream) -> std::io::Result<()> {
    let mut reader = BufReader::new(stream);
    let mut content_length = 0usize;
    loop {
        let mut line = String::new();
        if reader.read_line(&mut line)? == 0 {
            return Ok(());
        }
        let trimmed = line.trim_end();
        if trimmed.is_empty() {
            break;
        }
        if let Some(value) = trimmed
            .to_ascii_lowercase()
            .strip_prefix("content-length:")
            .map(str::trim)
            .and_then(|v| v.parse::<usize>().ok())
        {
            content_length = value;
        }
    }
    let mut body = vec![0u8; content_length];
    reader.read_exact(&mut body)?;
    Ok(())
}

/// Wraps text in the response fence the conductor protocol requires.
pub fn wrap_in_fence(text: &str) -> String {
    format!("```json\n{text}\n```")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sine_has_expected_rms() {
        let tone = sine(16000, 1.0, 220.0, 0.2);
        let rms = crate::dsp::frame_rms(tone.samples()).unwrap();
        assert!((rms - 0.2 / 2f64.sqrt()).abs() < 1e-3);
    }

    #[test]
    fn noise_is_seed_deterministic() {
        let a = white_noise(16000, 0.1, 0.5, 7);
        let b = white_noise(16000, 0.1, 0.5, 7);
        assert_eq!(a.samples(), b.samples());
        let c = white_noise(16000, 0.1, 0.5, 8);
        assert_ne!(a.samples(), c.samples());
    }
}
