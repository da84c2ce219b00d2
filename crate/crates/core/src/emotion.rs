use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of canonical emotions.
pub const NUM_EMOTIONS: usize = 6;

/// Tolerance on the probability sum of a distribution.
pub const SUM_TOLERANCE: f64 = 1e-9;

/// The six canonical emotions. Discriminants are the system-wide indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Emotion {
    Happiness = 0,
    Sadness = 1,
    Surprise = 2,
    Calmness = 3,
    Fear = 4,
    Anger = 5,
}

impl Emotion {
    /// Canonical order.
    pub const ALL: [Emotion; NUM_EMOTIONS] = [
        Emotion::Happiness,
        Emotion::Sadness,
        Emotion::Surprise,
        Emotion::Calmness,
        Emotion::Fear,
        Emotion::Anger,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Emotion> {
        Self::ALL.get(index).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Emotion::Happiness => "happiness",
            Emotion::Sadness => "sadness",
            Emotion::Surprise => "surprise",
            Emotion::Calmness => "calmness",
            Emotion::Fear => "fear",
            Emotion::Anger => "anger",
        }
    }

    /// Canonical names, in index order.
    pub fn names() -> [&'static str; NUM_EMOTIONS] {
        Self::ALL.map(Emotion::name)
    }
}

impl fmt::Display for Emotion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("unknown emotion {0:?}")]
pub struct UnknownEmotion(pub String);

impl FromStr for Emotion {
    type Err = UnknownEmotion;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.trim().to_ascii_lowercase();
        Self::ALL
            .into_iter()
            .find(|e| e.name() == lower)
            .ok_or_else(|| UnknownEmotion(s.to_string()))
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DistributionError {
    #[error("probability {value} at index {index} outside [0, 1]")]
    OutOfRange { index: usize, value: f64 },
    #[error("probabilities sum to {0}, expected 1")]
    BadSum(f64),
    #[error("weights must be finite, non-negative and not all zero")]
    DegenerateWeights,
}

/// Probability vector over the canonical emotions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(transparent)]
pub struct EmotionDistribution {
    probs: [f64; NUM_EMOTIONS],
}

impl EmotionDistribution {
    pub fn new(probs: [f64; NUM_EMOTIONS]) -> Result<Self, DistributionError> {
        for (index, &value) in probs.iter().enumerate() {
            if !(0.0..=1.0).contains(&value) {
                return Err(DistributionError::OutOfRange { index, value });
            }
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(DistributionError::BadSum(sum));
        }
        Ok(Self { probs })
    }

    /// Normalizes non-negative weights into a distribution.
    pub fn from_weights(weights: [f64; NUM_EMOTIONS]) -> Result<Self, DistributionError> {
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(DistributionError::DegenerateWeights);
        }
        let total: f64 = weights.iter().sum();
        if total.is_nan() || total <= 0.0 {
            return Err(DistributionError::DegenerateWeights);
        }
        Ok(Self {
            probs: weights.map(|w| w / total),
        })
    }

    pub fn uniform() -> Self {
        Self {
            probs: [1.0 / NUM_EMOTIONS as f64; NUM_EMOTIONS],
        }
    }

    pub fn one_hot(emotion: Emotion) -> Self {
        let mut probs = [0.0; NUM_EMOTIONS];
        probs[emotion.index()] = 1.0;
        Self { probs }
    }

    /// Numerically stable softmax.
    pub fn softmax(logits: [f64; NUM_EMOTIONS]) -> Self {
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps = logits.map(|l| (l - max).exp());
        let total: f64 = exps.iter().sum();
        Self {
            probs: exps.map(|e| e / total),
        }
    }

    pub fn probs(&self) -> &[f64; NUM_EMOTIONS] {
        &self.probs
    }

    pub fn prob(&self, emotion: Emotion) -> f64 {
        self.probs[emotion.index()]
    }

    /// Most probable emotion; ties go to the lower canonical index.
    pub fn argmax(&self) -> Emotion {
        let mut best = 0;
        for i in 1..NUM_EMOTIONS {
            if self.probs[i] > self.probs[best] {
                best = i;
            }
        }
        Emotion::ALL[best]
    }
}

impl<'de> Deserialize<'de> for EmotionDistribution {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let probs = <[f64; NUM_EMOTIONS]>::deserialize(deserializer)?;
        EmotionDistribution::new(probs).map_err(serde::de::Error::custom)
    }
}
