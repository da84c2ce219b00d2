//! MFCC feature extraction.
//!
//! Pipeline per clip: pre-emphasis, overlapping Hann-windowed frames, power
//! spectrum, triangular mel filterbank, log with a floor, orthonormal DCT-II.
//! The per-frame cepstra are averaged into one [`FeatureVector`] of
//! [`NUM_COEFFICIENTS`] values per clip.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::audio::AudioClip;
use crate::exec::Execution;

/// Number of cepstral coefficients kept per clip.
pub const NUM_COEFFICIENTS: usize = 40;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MfccError {
    #[error("signal too short: {samples} samples, need {frame_len} for one frame")]
    TooShort { samples: usize, frame_len: usize },
    #[error("invalid frame spec: {0}")]
    InvalidSpec(String),
}

/// Framing and filterbank parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSpec {
    pub frame_len: usize,
    pub hop_len: usize,
    pub fft_size: usize,
    pub mel_filters: usize,
    pub preemphasis: f64,
    pub log_floor: f64,
}

impl Default for FrameSpec {
    fn default() -> Self {
        Self {
            frame_len: 400,
            hop_len: 160,
            fft_size: 512,
            mel_filters: 40,
            preemphasis: 0.97,
            log_floor: 1e-10,
        }
    }
}

impl FrameSpec {
    pub fn validate(&self) -> Result<(), MfccError> {
        let bad = |m: &str| Err(MfccError::InvalidSpec(m.to_string()));
        if self.frame_len == 0 || self.hop_len == 0 {
            return bad("frame_len and hop_len must be positive");
        }
        if !self.fft_size.is_power_of_two() || self.fft_size < self.frame_len {
            return bad("fft_size must be a power of two no smaller than frame_len");
        }
        if self.mel_filters < NUM_COEFFICIENTS {
            return bad("mel_filters must be at least 40");
        }
        if !(0.0..1.0).contains(&self.preemphasis) {
            return bad("preemphasis must lie in [0, 1)");
        }
        if self.log_floor.is_nan() || self.log_floor <= 0.0 {
            return bad("log_floor must be positive");
        }
        Ok(())
    }

    /// Number of whole frames that fit in `samples` samples.
    pub fn frame_count(&self, samples: usize) -> usize {
        if samples < self.frame_len {
            0
        } else {
            (samples - self.frame_len) / self.hop_len + 1
        }
    }
}

/// Per-clip MFCC summary: the mean of the per-frame cepstra.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    coefficients: Vec<f64>,
    frame_count: usize,
}

impl FeatureVector {
    pub fn new(coefficients: Vec<f64>, frame_count: usize) -> Result<Self, MfccError> {
        if coefficients.len() != NUM_COEFFICIENTS {
            return Err(MfccError::InvalidSpec(format!(
                "feature vector needs {NUM_COEFFICIENTS} coefficients, got {}",
                coefficients.len()
            )));
        }
        if coefficients.iter().any(|c| !c.is_finite()) || frame_count == 0 {
            return Err(MfccError::InvalidSpec(
                "feature vector must be finite and cover at least one frame".into(),
            ));
        }
        Ok(Self {
            coefficients,
            frame_count,
        })
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn frame_count(&self) -> usize {
        self.frame_count
    }
}

impl Serialize for FeatureVector {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.coefficients.serialize(serializer)
    }
}

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Symmetric Hann window of length `n`.
pub fn hann_window(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    let denom = (n - 1) as f64;
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / denom).cos())
        .collect()
}

/// First-order pre-emphasis, `y[0] = x[0]`.
pub fn preemphasize(samples: &[f64], coeff: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(samples.len());
    let mut prev = 0.0;
    for (i, &x) in samples.iter().enumerate() {
        out.push(if i == 0 { x } else { x - coeff * prev });
        prev = x;
    }
    out
}

/// Triangular mel filterbank, `mel_filters` rows of `fft_size / 2 + 1`
/// weights. Filter edges are spaced uniformly in mel between 0 Hz and
/// Nyquist; each triangle peaks at 1 on its centre frequency and is evaluated
/// at the exact frequency of every FFT bin.
pub fn mel_filterbank(mel_filters: usize, fft_size: usize, sample_rate_hz: u32) -> Vec<Vec<f64>> {
    let bins = fft_size / 2 + 1;
    let nyquist = sample_rate_hz as f64 / 2.0;
    let mel_max = hz_to_mel(nyquist);
    let edges: Vec<f64> = (0..mel_filters + 2)
        .map(|i| mel_to_hz(mel_max * i as f64 / (mel_filters + 1) as f64))
        .collect();
    let bin_hz = sample_rate_hz as f64 / fft_size as f64;
    (0..mel_filters)
        .map(|m| {
            let (lo, centre, hi) = (edges[m], edges[m + 1], edges[m + 2]);
            (0..bins)
                .map(|k| {
                    let f = k as f64 * bin_hz;
                    let rising = (f - lo) / (centre - lo);
                    let falling = (hi - f) / (hi - centre);
                    rising.min(falling).max(0.0)
                })
                .collect()
        })
        .collect()
}

/// Orthonormal DCT-II basis: `rows` output coefficients over `n` inputs.
fn dct_basis(rows: usize, n: usize) -> Vec<Vec<f64>> {
    (0..rows)
        .map(|k| {
            let scale = if k == 0 {
                (1.0 / n as f64).sqrt()
            } else {
                (2.0 / n as f64).sqrt()
            };
            (0..n)
                .map(|i| scale * (PI * k as f64 * (2 * i + 1) as f64 / (2 * n) as f64).cos())
                .collect()
        })
        .collect()
}

/// Precomputed window, filterbank, DCT basis and FFT plan for one
/// (spec, sample rate) pair. Immutable and shareable across threads.
#[derive(Clone)]
pub struct MfccExtractor {
    spec: FrameSpec,
    window: Vec<f64>,
    filterbank: Vec<Vec<f64>>,
    dct: Vec<Vec<f64>>,
    fft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for MfccExtractor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MfccExtractor")
            .field("spec", &self.spec)
            .finish_non_exhaustive()
    }
}

impl MfccExtractor {
    pub fn new(spec: FrameSpec, sample_rate_hz: u32) -> Result<Self, MfccError> {
        spec.validate()?;
        let fft = FftPlanner::new().plan_fft_forward(spec.fft_size);
        Ok(Self {
            window: hann_window(spec.frame_len),
            filterbank: mel_filterbank(spec.mel_filters, spec.fft_size, sample_rate_hz),
            dct: dct_basis(NUM_COEFFICIENTS, spec.mel_filters),
            fft,
            spec,
        })
    }

    pub fn spec(&self) -> &FrameSpec {
        &self.spec
    }

    pub fn filterbank(&self) -> &[Vec<f64>] {
        &self.filterbank
    }

    /// Pre-emphasized, Hann-windowed frames; a trailing partial frame is
    /// dropped.
    pub fn frames(&self, samples: &[f64]) -> Result<Vec<Vec<f64>>, MfccError> {
        let count = self.spec.frame_count(samples.len());
        if count == 0 {
            return Err(MfccError::TooShort {
                samples: samples.len(),
                frame_len: self.spec.frame_len,
            });
        }
        let emphasized = preemphasize(samples, self.spec.preemphasis);
        Ok((0..count)
            .map(|i| {
                let start = i * self.spec.hop_len;
                emphasized[start..start + self.spec.frame_len]
                    .iter()
                    .zip(&self.window)
                    .map(|(x, w)| x * w)
                    .collect()
            })
            .collect())
    }

    /// `|DFT|^2 / fft_size` for bins `0..=fft_size/2` of a zero-padded frame.
    pub fn power_spectrum(&self, frame: &[f64]) -> Vec<f64> {
        let n = self.spec.fft_size;
        assert!(frame.len() <= n, "frame longer than fft_size");
        let mut buf: Vec<Complex<f64>> = frame.iter().map(|&x| Complex::new(x, 0.0)).collect();
        buf.resize(n, Complex::new(0.0, 0.0));
        self.fft.process(&mut buf);
        buf[..n / 2 + 1]
            .iter()
            .map(|c| c.norm_sqr() / n as f64)
            .collect()
    }

    pub fn filterbank_energies(&self, spectrum: &[f64]) -> Vec<f64> {
        self.filterbank
            .iter()
            .map(|row| row.iter().zip(spectrum).map(|(w, p)| w * p).sum())
            .collect()
    }

    /// Log-floored mel energies through the DCT, 40 coefficients.
    pub fn cepstrum(&self, energies: &[f64]) -> Vec<f64> {
        let logs: Vec<f64> = energies
            .iter()
            .map(|&e| e.max(self.spec.log_floor).ln())
            .collect();
        self.dct
            .iter()
            .map(|row| row.iter().zip(&logs).map(|(b, l)| b * l).sum())
            .collect()
    }

    fn frame_cepstrum(&self, frame: &[f64]) -> Vec<f64> {
        self.cepstrum(&self.filterbank_energies(&self.power_spectrum(frame)))
    }

    /// Cepstra of every frame, in frame order.
    pub fn frame_cepstra(
        &self,
        clip: &AudioClip,
        exec: Execution,
    ) -> Result<Vec<Vec<f64>>, MfccError> {
        let frames = self.frames(clip.samples())?;
        Ok(exec.map(&frames, |f| self.frame_cepstrum(f)))
    }

    pub fn extract(&self, clip: &AudioClip) -> Result<FeatureVector, MfccError> {
        self.extract_with(clip, Execution::default())
    }

    pub fn extract_with(
        &self,
        clip: &AudioClip,
        exec: Execution,
    ) -> Result<FeatureVector, MfccError> {
        let cepstra = self.frame_cepstra(clip, exec)?;
        let count = cepstra.len();
        // summed in frame order so both execution modes agree bit for bit
        let mut mean = vec![0.0; NUM_COEFFICIENTS];
        for c in &cepstra {
            for (m, v) in mean.iter_mut().zip(c) {
                *m += v;
            }
        }
        for m in &mut mean {
            *m /= count as f64;
        }
        FeatureVector::new(mean, count)
    }
}

/// Frames a clip; see [`MfccExtractor::frames`].
pub fn frame_signal(clip: &AudioClip, spec: &FrameSpec) -> Result<Vec<Vec<f64>>, MfccError> {
    MfccExtractor::new(spec.clone(), clip.sample_rate_hz())?.frames(clip.samples())
}

/// Power spectrum of one frame; see [`MfccExtractor::power_spectrum`].
pub fn power_spectrum(frame: &[f64], fft_size: usize) -> Vec<f64> {
    let n = fft_size;
    assert!(frame.len() <= n, "frame longer than fft_size");
    let fft = FftPlanner::new().plan_fft_forward(n);
    let mut buf: Vec<Complex<f64>> = frame.iter().map(|&x| Complex::new(x, 0.0)).collect();
    buf.resize(n, Complex::new(0.0, 0.0));
    fft.process(&mut buf);
    buf[..n / 2 + 1]
        .iter()
        .map(|c| c.norm_sqr() / n as f64)
        .collect()
}

/// Weighted filterbank sums of a power spectrum.
pub fn mel_filterbank_energies(
    spectrum: &[f64],
    spec: &FrameSpec,
    sample_rate_hz: u32,
) -> Vec<f64> {
    assert_eq!(spectrum.len(), spec.fft_size / 2 + 1, "spectrum length");
    mel_filterbank(spec.mel_filters, spec.fft_size, sample_rate_hz)
        .iter()
        .map(|row| row.iter().zip(spectrum).map(|(w, p)| w * p).sum())
        .collect()
}

/// One-shot MFCC of a clip.
pub fn mfcc(clip: &AudioClip, spec: &FrameSpec) -> Result<FeatureVector, MfccError> {
    MfccExtractor::new(spec.clone(), clip.sample_rate_hz())?.extract(clip)
}
