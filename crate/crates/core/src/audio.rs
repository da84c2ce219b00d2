//! Audio ingest: RIFF/WAVE parsing, normalization to 16 kHz mono, and the
//! canonical 16-bit re-encoding used for storage and content addressing.
//!
//! Every clip that leaves this module is mono, sampled at
//! [`CANONICAL_RATE_HZ`], holds at least [`MIN_SAMPLES`] samples, and keeps
//! each sample inside `[-1.0, 1.0]`.

use sha2::{Digest, Sha256};
use thiserror::Error;

/// Sample rate every clip is normalized to.
pub const CANONICAL_RATE_HZ: u32 = 16_000;

/// One analysis frame (25 ms at 16 kHz).
pub const MIN_SAMPLES: usize = 400;

/// Input sample rates accepted by [`parse_wav`].
pub const ACCEPTED_RATES: [u32; 5] = [8_000, 16_000, 22_050, 44_100, 48_000];

/// Default upper bound on message length.
pub const DEFAULT_MAX_DURATION_MS: u64 = 120_000;

const PCM_SCALE: f64 = 32_768.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AudioError {
    #[error("malformed container: {0}")]
    MalformedContainer(String),
    #[error("unsupported encoding: {0}")]
    UnsupportedEncoding(String),
    #[error("unsupported sample rate {0} Hz")]
    UnsupportedRate(u32),
    #[error("clip too short: {samples} samples, need at least {MIN_SAMPLES}")]
    TooShort { samples: usize },
    #[error("clip too long: {duration_ms} ms exceeds the {max_ms} ms cap")]
    TooLong { duration_ms: u64, max_ms: u64 },
    #[error("invalid sample at index {index}: {value}")]
    InvalidSample { index: usize, value: f64 },
}

impl AudioError {
    /// Stable reason code, used on the wire and in CLI output.
    pub fn code(&self) -> &'static str {
        match self {
            AudioError::MalformedContainer(_) => "MalformedContainer",
            AudioError::UnsupportedEncoding(_) => "UnsupportedEncoding",
            AudioError::UnsupportedRate(_) => "UnsupportedRate",
            AudioError::TooShort { .. } => "TooShort",
            AudioError::TooLong { .. } => "TooLong",
            AudioError::InvalidSample { .. } => "InvalidSample",
        }
    }
}

/// Validated mono PCM audio at the canonical rate.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    samples: Vec<f64>,
}

impl AudioClip {
    /// Wraps already-normalized 16 kHz mono samples.
    pub fn new(samples: Vec<f64>) -> Result<Self, AudioError> {
        if samples.len() < MIN_SAMPLES {
            return Err(AudioError::TooShort {
                samples: samples.len(),
            });
        }
        if let Some((index, &value)) = samples
            .iter()
            .enumerate()
            .find(|(_, s)| !s.is_finite() || s.abs() > 1.0)
        {
            return Err(AudioError::InvalidSample { index, value });
        }
        Ok(Self { samples })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn sample_rate_hz(&self) -> u32 {
        CANONICAL_RATE_HZ
    }

    pub fn duration_ms(&self) -> u64 {
        (1000.0 * self.samples.len() as f64 / CANONICAL_RATE_HZ as f64).round() as u64
    }

    /// Rejects clips longer than `max_ms`.
    pub fn check_duration(&self, max_ms: u64) -> Result<(), AudioError> {
        let duration_ms = self.duration_ms();
        if duration_ms > max_ms {
            return Err(AudioError::TooLong {
                duration_ms,
                max_ms,
            });
        }
        Ok(())
    }

    /// Little-endian 16-bit PCM bytes of the samples, no header.
    pub fn pcm16_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.samples.len() * 2);
        for &s in &self.samples {
            out.extend_from_slice(&quantize(s).to_le_bytes());
        }
        out
    }

    /// SHA-256 over [`AudioClip::pcm16_bytes`], lowercase hex.
    pub fn digest(&self) -> String {
        clip_digest(self)
    }
}

fn quantize(sample: f64) -> i16 {
    (sample * PCM_SCALE)
        .round()
        .clamp(i16::MIN as f64, i16::MAX as f64) as i16
}

/// Content digest of the canonical 16-bit encoding of a clip.
pub fn clip_digest(clip: &AudioClip) -> String {
    hex::encode(Sha256::digest(clip.pcm16_bytes()))
}

/// Canonical WAV encoding: RIFF/WAVE, PCM, 16 kHz, mono, 16-bit little-endian.
pub fn encode_wav(clip: &AudioClip) -> Vec<u8> {
    let data = clip.pcm16_bytes();
    let mut out = Vec::with_capacity(44 + data.len());
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data.len() as u32).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes()); // PCM
    out.extend_from_slice(&1u16.to_le_bytes()); // mono
    out.extend_from_slice(&CANONICAL_RATE_HZ.to_le_bytes());
    out.extend_from_slice(&(CANONICAL_RATE_HZ * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data.len() as u32).to_le_bytes());
    out.extend_from_slice(&data);
    out
}

/// Raw 16-bit PCM as found in a WAV file, before normalization.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PcmData {
    pub sample_rate_hz: u32,
    pub channels: u16,
    /// Interleaved samples.
    pub samples: Vec<i16>,
}

struct Format {
    audio_format: u16,
    channels: u16,
    sample_rate: u32,
    block_align: u16,
    bits_per_sample: u16,
}

fn read_u16(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn read_u32(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

/// Parses the RIFF container and returns interleaved 16-bit samples.
pub fn read_pcm16(bytes: &[u8]) -> Result<PcmData, AudioError> {
    let malformed = |msg: &str| AudioError::MalformedContainer(msg.to_string());
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(malformed("missing RIFF/WAVE header"));
    }
    let riff_len = read_u32(bytes, 4) as usize;
    if riff_len < 4 || riff_len + 8 > bytes.len() {
        return Err(malformed("RIFF size exceeds file length"));
    }
    let body = &bytes[..riff_len + 8];

    let mut format: Option<Format> = None;
    let mut data: Option<&[u8]> = None;
    let mut pos = 12;
    while pos + 8 <= body.len() {
        let id = &body[pos..pos + 4];
        let size = read_u32(body, pos + 4) as usize;
        let start = pos + 8;
        let end = start
            .checked_add(size)
            .filter(|&e| e <= body.len())
            .ok_or_else(|| malformed("chunk size exceeds container"))?;
        match id {
            b"fmt " => {
                if size < 16 {
                    return Err(malformed("fmt chunk shorter than 16 bytes"));
                }
                format = Some(Format {
                    audio_format: read_u16(body, start),
                    channels: read_u16(body, start + 2),
                    sample_rate: read_u32(body, start + 4),
                    block_align: read_u16(body, start + 12),
                    bits_per_sample: read_u16(body, start + 14),
                });
            }
            b"data" => data = Some(&body[start..end]),
            _ => {}
        }
        // chunks are word aligned
        pos = end + (size & 1);
    }

    let format = format.ok_or_else(|| malformed("missing fmt chunk"))?;
    let data = data.ok_or_else(|| malformed("missing data chunk"))?;
    if format.audio_format != 1 {
        return Err(AudioError::UnsupportedEncoding(format!(
            "format tag {} is not PCM",
            format.audio_format
        )));
    }
    if format.bits_per_sample != 16 {
        return Err(AudioError::UnsupportedEncoding(format!(
            "{} bits per sample",
            format.bits_per_sample
        )));
    }
    if !(1..=2).contains(&format.channels) {
        return Err(AudioError::UnsupportedEncoding(format!(
            "{} channels",
            format.channels
        )));
    }
    if format.block_align != format.channels * 2 {
        return Err(malformed("block align does not match channel layout"));
    }
    if !ACCEPTED_RATES.contains(&format.sample_rate) {
        return Err(AudioError::UnsupportedRate(format.sample_rate));
    }
    if data.len() % format.block_align as usize != 0 {
        return Err(malformed("data chunk is not a whole number of frames"));
    }
    let samples = data
        .chunks_exact(2)
        .map(|c| i16::from_le_bytes([c[0], c[1]]))
        .collect();
    Ok(PcmData {
        sample_rate_hz: format.sample_rate,
        channels: format.channels,
        samples,
    })
}

/// Averages interleaved channels into one.
pub fn downmix(interleaved: &[f64], channels: usize) -> Vec<f64> {
    if channels == 1 {
        return interleaved.to_vec();
    }
    interleaved
        .chunks_exact(channels)
        .map(|frame| frame.iter().sum::<f64>() / channels as f64)
        .collect()
}

/// Linear-interpolation resampler.
///
/// Output sample `i` sits at input position `i * from / to`; the value is
/// interpolated between the two neighbouring input samples, holding the last
/// sample past the end. The output has `round(len * to / from)` samples.
pub fn resample_linear(input: &[f64], from_hz: u32, to_hz: u32) -> Vec<f64> {
    if from_hz == to_hz || input.is_empty() {
        return input.to_vec();
    }
    let out_len = (input.len() as f64 * to_hz as f64 / from_hz as f64).round() as usize;
    let step = from_hz as f64 / to_hz as f64;
    let last = input.len() - 1;
    (0..out_len)
        .map(|i| {
            let pos = i as f64 * step;
            let base = pos.floor() as usize;
            if base >= last {
                return input[last];
            }
            let frac = pos - base as f64;
            input[base] * (1.0 - frac) + input[base + 1] * frac
        })
        .collect()
}

/// Parses a WAV file and normalizes it to a canonical [`AudioClip`].
pub fn parse_wav(bytes: &[u8]) -> Result<AudioClip, AudioError> {
    let pcm = read_pcm16(bytes)?;
    let scaled: Vec<f64> = pcm.samples.iter().map(|&s| s as f64 / PCM_SCALE).collect();
    let mono = downmix(&scaled, pcm.channels as usize);
    let samples = resample_linear(&mono, pcm.sample_rate_hz, CANONICAL_RATE_HZ);
    AudioClip::new(samples)
}

/// [`parse_wav`] followed by a duration cap.
pub fn parse_wav_capped(bytes: &[u8], max_duration_ms: u64) -> Result<AudioClip, AudioError> {
    let clip = parse_wav(bytes)?;
    clip.check_duration(max_duration_ms)?;
    Ok(clip)
}

/// Encodes interleaved 16-bit samples as a PCM WAV at any rate and channel
/// count. Used by tools and tests to produce non-canonical inputs.
pub fn encode_pcm16_wav(samples: &[i16], sample_rate_hz: u32, channels: u16) -> Vec<u8> {
    let data_len = (samples.len() * 2) as u32;
    let mut out = Vec::with_capacity(44 + data_len as usize);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&channels.to_le_bytes());
    out.extend_from_slice(&sample_rate_hz.to_le_bytes());
    out.extend_from_slice(&(sample_rate_hz * channels as u32 * 2).to_le_bytes());
    out.extend_from_slice(&(channels * 2).to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for s in samples {
        out.extend_from_slice(&s.to_le_bytes());
    }
    out
}
