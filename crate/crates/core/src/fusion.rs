//! Decision-level fusion and the top-two recommendation ordering.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::emotion::{Emotion, EmotionDistribution, NUM_EMOTIONS};

#[derive(Debug, Error, Clone, PartialEq)]
#[error("fusion weights must be finite, non-negative and sum to a positive value (got {speech}, {text})")]
pub struct InvalidWeights {
    pub speech: f64,
    pub text: f64,
}

/// Modality weights. Only their ratio matters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawWeights")]
pub struct FusionWeights {
    speech: f64,
    text: f64,
}

/// A missing field takes its default.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawWeights {
    #[serde(default = "default_speech")]
    speech: f64,
    #[serde(default = "default_text")]
    text: f64,
}

fn default_speech() -> f64 {
    FusionWeights::default().speech
}

fn default_text() -> f64 {
    FusionWeights::default().text
}

impl TryFrom<RawWeights> for FusionWeights {
    type Error = InvalidWeights;
    fn try_from(raw: RawWeights) -> Result<Self, Self::Error> {
        FusionWeights::new(raw.speech, raw.text)
    }
}

impl Default for FusionWeights {
    /// Speech : text = 1 : 2.
    fn default() -> Self {
        Self {
            speech: 1.0,
            text: 2.0,
        }
    }
}

impl FusionWeights {
    pub fn new(speech: f64, text: f64) -> Result<Self, InvalidWeights> {
        let ok = speech.is_finite() && text.is_finite() && speech >= 0.0 && text >= 0.0;
        if !ok || speech + text <= 0.0 {
            return Err(InvalidWeights { speech, text });
        }
        Ok(Self { speech, text })
    }

    pub fn speech(&self) -> f64 {
        self.speech
    }

    pub fn text(&self) -> f64 {
        self.text
    }

    /// Weights scaled to sum to one.
    pub fn normalized(&self) -> (f64, f64) {
        let total = self.speech + self.text;
        (self.speech / total, self.text / total)
    }
}

/// Which modalities contributed to the fused distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Modality {
    Fused,
    SpeechOnly,
}

impl Modality {
    pub fn as_str(self) -> &'static str {
        match self {
            Modality::Fused => "fused",
            Modality::SpeechOnly => "speech-only",
        }
    }
}

/// Weighted sum of the two distributions with weights normalized to one.
pub fn fuse(
    speech: &EmotionDistribution,
    text: &EmotionDistribution,
    weights: &FusionWeights,
) -> EmotionDistribution {
    let (ws, wt) = weights.normalized();
    let mut probs = [0.0; NUM_EMOTIONS];
    for (i, p) in probs.iter_mut().enumerate() {
        *p = ws * speech.probs()[i] + wt * text.probs()[i];
    }
    // a convex combination of distributions; clamp away rounding past 1
    EmotionDistribution::new(probs.map(|p| p.clamp(0.0, 1.0)))
        .expect("convex combination of distributions")
}

/// Fallback when no transcript is available: the speech distribution as is.
pub fn fuse_speech_only(speech: &EmotionDistribution) -> EmotionDistribution {
    *speech
}

/// Emotion ordering shown to the sender.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Recommendation {
    pub fused: EmotionDistribution,
    pub order: [Emotion; NUM_EMOTIONS],
}

impl Recommendation {
    pub fn top_two(&self) -> (Emotion, Emotion) {
        (self.order[0], self.order[1])
    }

    pub fn order_indices(&self) -> [usize; NUM_EMOTIONS] {
        self.order.map(Emotion::index)
    }
}

/// Two most probable emotions first (ties to the lower canonical index), then
/// the remaining four in canonical order.
pub fn recommend(fused: &EmotionDistribution) -> Recommendation {
    let p = fused.probs();
    let better = |a: usize, b: usize| p[a] > p[b] || (p[a] == p[b] && a < b);
    let mut first = 0;
    for i in 1..NUM_EMOTIONS {
        if better(i, first) {
            first = i;
        }
    }
    let mut second = usize::MAX;
    for i in (0..NUM_EMOTIONS).filter(|&i| i != first) {
        if second == usize::MAX || better(i, second) {
            second = i;
        }
    }
    let mut order = [Emotion::Happiness; NUM_EMOTIONS];
    order[0] = Emotion::ALL[first];
    order[1] = Emotion::ALL[second];
    for (slot, e) in order[2..].iter_mut().zip(
        Emotion::ALL
            .into_iter()
            .filter(|e| e.index() != first && e.index() != second),
    ) {
        *slot = e;
    }
    Recommendation {
        fused: *fused,
        order,
    }
}
