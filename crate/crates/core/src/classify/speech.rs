//! Acoustic emotion classification: a dense-layer inference container with
//! a little-endian weight file format, plus a rule-based fallback used when
//! no weight file is configured.

use thiserror::Error;

use crate::audio::AudioClip;
use crate::emotion::{Emotion, EmotionDistribution, NUM_EMOTIONS};
use crate::mfcc::{FeatureVector, NUM_COEFFICIENTS};

const MAGIC: &[u8; 4] = b"EMOW";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("bad magic, expected \"EMOW\"")]
    BadMagic,
    #[error("unsupported weight format version {0}")]
    VersionUnsupported(u32),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("weight file truncated")]
    TruncatedFile,
    #[error("unknown activation code {0}")]
    UnknownActivation(u32),
    #[error("non-finite parameter in layer {0}")]
    NonFinite(usize),
    #[error("{0} trailing bytes after the last layer")]
    TrailingData(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Relu,
}

impl Activation {
    fn code(self) -> u32 {
        match self {
            Activation::Identity => 0,
            Activation::Relu => 1,
        }
    }

    fn from_code(code: u32) -> Result<Self, ModelError> {
        match code {
            0 => Ok(Activation::Identity),
            1 => Ok(Activation::Relu),
            other => Err(ModelError::UnknownActivation(other)),
        }
    }
}

/// One affine layer `y = act(x W + b)`, `W` stored row-major as
/// `rows` (inputs) by `cols` (outputs).
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub rows: usize,
    pub cols: usize,
    pub activation: Activation,
    pub weights: Vec<f32>,
    pub biases: Vec<f32>,
}

impl DenseLayer {
    pub fn new(
        rows: usize,
        cols: usize,
        activation: Activation,
        weights: Vec<f32>,
        biases: Vec<f32>,
    ) -> Result<Self, ModelError> {
        if rows == 0 || cols == 0 || weights.len() != rows * cols || biases.len() != cols {
            return Err(ModelError::DimensionMismatch(format!(
                "layer {rows}x{cols} with {} weights and {} biases",
                weights.len(),
                biases.len()
            )));
        }
        Ok(Self {
            rows,
            cols,
            activation,
            weights,
            biases,
        })
    }

    fn forward(&self, input: &[f64]) -> Vec<f64> {
        let mut out: Vec<f64> = self.biases.iter().map(|&b| b as f64).collect();
        for (r, &x) in input.iter().enumerate() {
            let row = &self.weights[r * self.cols..(r + 1) * self.cols];
            for (o, &w) in out.iter_mut().zip(row) {
                *o += x * w as f64;
            }
        }
        if self.activation == Activation::Relu {
            for o in &mut out {
                *o = o.max(0.0);
            }
        }
        out
    }
}

/// Chain of dense layers ending in six logits.
#[derive(Debug, Clone, PartialEq)]
pub struct AcousticModel {
    layers: Vec<DenseLayer>,
}

impl AcousticModel {
    /// Validates the dimension chain and that it ends at six outputs.
    pub fn new(layers: Vec<DenseLayer>) -> Result<Self, ModelError> {
        let last = layers
            .last()
            .ok_or_else(|| ModelError::DimensionMismatch("model has no layers".into()))?;
        if last.cols != NUM_EMOTIONS {
            return Err(ModelError::DimensionMismatch(format!(
                "final layer has {} outputs, expected {NUM_EMOTIONS}",
                last.cols
            )));
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].cols != pair[1].rows {
                return Err(ModelError::DimensionMismatch(format!(
                    "layer {i} outputs {} but layer {} expects {}",
                    pair[0].cols,
                    i + 1,
                    pair[1].rows
                )));
            }
        }
        for (i, layer) in layers.iter().enumerate() {
            if layer
                .weights
                .iter()
                .chain(&layer.biases)
                .any(|w| !w.is_finite())
            {
                return Err(ModelError::NonFinite(i));
            }
        }
        Ok(Self { layers })
    }

    /// Single identity layer of zeros: every input maps to the uniform
    /// distribution.
    pub fn zeros() -> Self {
        let layer = DenseLayer::new(
            NUM_COEFFICIENTS,
            NUM_EMOTIONS,
            Activation::Identity,
            vec![0.0; NUM_COEFFICIENTS * NUM_EMOTIONS],
            vec![0.0; NUM_EMOTIONS],
        )
        .expect("static dimensions");
        Self {
            layers: vec![layer],
        }
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].rows
    }

    pub fn logits(&self, features: &FeatureVector) -> Result<[f64; NUM_EMOTIONS], ModelError> {
        if self.input_dim() != NUM_COEFFICIENTS {
            return Err(ModelError::DimensionMismatch(format!(
                "model expects {} inputs, features have {NUM_COEFFICIENTS}",
                self.input_dim()
            )));
        }
        let mut x = features.coefficients().to_vec();
        for layer in &self.layers {
            x = layer.forward(&x);
        }
        Ok(x.try_into().expect("validated final width"))
    }

    /// EMOW serialization.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.layers.len() as u32).to_le_bytes());
        for layer in &self.layers {
            out.extend_from_slice(&(layer.rows as u32).to_le_bytes());
            out.extend_from_slice(&(layer.cols as u32).to_le_bytes());
            out.extend_from_slice(&layer.activation.code().to_le_bytes());
            for w in layer.weights.iter().chain(&layer.biases) {
                out.extend_from_slice(&w.to_le_bytes());
            }
        }
        out
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8], ModelError> {
        let end = self.pos.checked_add(n).ok_or(ModelError::TruncatedFile)?;
        let slice = self
            .bytes
            .get(self.pos..end)
            .ok_or(ModelError::TruncatedFile)?;
        self.pos = end;
        Ok(slice)
    }

    fn u32(&mut self) -> Result<u32, ModelError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f32s(&mut self, n: usize) -> Result<Vec<f32>, ModelError> {
        let len = n.checked_mul(4).ok_or(ModelError::TruncatedFile)?;
        Ok(self
            .take(len)?
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

/// Parses an EMOW weight file.
pub fn load_acoustic_model(bytes: &[u8]) -> Result<AcousticModel, ModelError> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4).map_err(|_| ModelError::BadMagic)? != MAGIC {
        return Err(ModelError::BadMagic);
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(ModelError::VersionUnsupported(version));
    }
    let layer_count = r.u32()? as usize;
    let mut layers = Vec::with_capacity(layer_count.min(64));
    for _ in 0..layer_count {
        let rows = r.u32()? as usize;
        let cols = r.u32()? as usize;
        let activation = Activation::from_code(r.u32()?)?;
        let weights = r.f32s(rows.checked_mul(cols).ok_or(ModelError::TruncatedFile)?)?;
        let biases = r.f32s(cols)?;
        layers.push(DenseLayer::new(rows, cols, activation, weights, biases)?);
    }
    if r.pos != bytes.len() {
        return Err(ModelError::TrailingData(bytes.len() - r.pos));
    }
    AcousticModel::new(layers)
}

/// Forward pass and softmax: the speech-based distribution.
pub fn classify_speech(
    features: &FeatureVector,
    model: &AcousticModel,
) -> Result<EmotionDistribution, ModelError> {
    Ok(EmotionDistribution::softmax(model.logits(features)?))
}

/// Constants for the rule-based acoustic fallback. Not tuned for accuracy.
#[derive(Debug, Clone, PartialEq)]
pub struct HeuristicThresholds {
    /// RMS at or above this counts as loud.
    pub loud_rms: f64,
    /// RMS below this counts as quiet.
    pub quiet_rms: f64,
    /// Coefficient of variation of frame RMS at or above this counts as dynamic.
    pub dynamic_cv: f64,
    /// Coefficient of variation below this counts as steady.
    pub steady_cv: f64,
    /// Zero-crossing rate (per sample) above which loud, dynamic audio leans
    /// towards surprise rather than anger.
    pub bright_zcr: f64,
    pub frame_len: usize,
    pub hop_len: usize,
}

impl Default for HeuristicThresholds {
    fn default() -> Self {
        Self {
            loud_rms: 0.1,
            quiet_rms: 0.03,
            dynamic_cv: 0.5,
            steady_cv: 0.25,
            bright_zcr: 0.15,
            frame_len: 400,
            hop_len: 160,
        }
    }
}

/// Summary statistics the fallback rules look at.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProsodyStats {
    pub rms: f64,
    pub zero_crossing_rate: f64,
    /// Coefficient of variation (std / mean) of per-frame RMS; 0 for silence.
    pub energy_cv: f64,
}

pub fn prosody_stats(clip: &AudioClip, t: &HeuristicThresholds) -> ProsodyStats {
    let s = clip.samples();
    let n = s.len() as f64;
    let rms = (s.iter().map(|x| x * x).sum::<f64>() / n).sqrt();
    let crossings = s
        .windows(2)
        .filter(|w| (w[0] >= 0.0) != (w[1] >= 0.0))
        .count();
    let zero_crossing_rate = crossings as f64 / (n - 1.0);

    let frame_rms: Vec<f64> = (0..)
        .map(|i| i * t.hop_len)
        .take_while(|start| start + t.frame_len <= s.len())
        .map(|start| {
            let f = &s[start..start + t.frame_len];
            (f.iter().map(|x| x * x).sum::<f64>() / f.len() as f64).sqrt()
        })
        .collect();
    let mean = frame_rms.iter().sum::<f64>() / frame_rms.len().max(1) as f64;
    let energy_cv = if mean > 0.0 {
        let var =
            frame_rms.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / frame_rms.len() as f64;
        var.sqrt() / mean
    } else {
        0.0
    };
    ProsodyStats {
        rms,
        zero_crossing_rate,
        energy_cv,
    }
}

/// Rule-based speech distribution.
///
/// Every emotion starts with a score of 1. Loud and dynamic audio adds 3 to
/// anger and 2 to surprise, and one more point to surprise when the
/// zero-crossing rate is high, otherwise to anger. Quiet and steady audio adds
/// 3 to calmness and 2 to sadness. Anything else adds 1.5 to happiness.
/// Scores are normalized into a distribution.
pub fn classify_speech_heuristic(clip: &AudioClip, t: &HeuristicThresholds) -> EmotionDistribution {
    let stats = prosody_stats(clip, t);
    let mut scores = [1.0; NUM_EMOTIONS];
    let loud = stats.rms >= t.loud_rms;
    let dynamic = stats.energy_cv >= t.dynamic_cv;
    let quiet = stats.rms < t.quiet_rms;
    let steady = stats.energy_cv < t.steady_cv;
    if loud && dynamic {
        scores[Emotion::Anger.index()] += 3.0;
        scores[Emotion::Surprise.index()] += 2.0;
        if stats.zero_crossing_rate > t.bright_zcr {
            scores[Emotion::Surprise.index()] += 1.0;
        } else {
            scores[Emotion::Anger.index()] += 1.0;
        }
    } else if quiet && steady {
        scores[Emotion::Calmness.index()] += 3.0;
        scores[Emotion::Sadness.index()] += 2.0;
    } else {
        scores[Emotion::Happiness.index()] += 1.5;
    }
    EmotionDistribution::from_weights(scores).expect("positive scores")
}
