//! The classify-and-recommend pipeline shared by the relay server and the
//! offline tools.

use serde::Serialize;
use thiserror::Error;

use crate::audio::AudioClip;
use crate::classify::speech::{
    classify_speech, classify_speech_heuristic, AcousticModel, HeuristicThresholds, ModelError,
};
use crate::classify::text::{classify_text, EmotionLexicon};
use crate::classify::transcribe::{Transcriber, TranscriptionError};
use crate::emotion::{Emotion, EmotionDistribution};
use crate::exec::Execution;
use crate::fusion::{fuse, fuse_speech_only, recommend, FusionWeights, Modality, Recommendation};
use crate::mfcc::{FeatureVector, FrameSpec, MfccError, MfccExtractor};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PipelineError {
    #[error(transparent)]
    Mfcc(#[from] MfccError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Where the speech distribution came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SpeechSource {
    Model,
    Heuristic,
}

/// Everything computed for one clip.
#[derive(Debug, Clone, PartialEq)]
pub struct Analysis {
    pub features: FeatureVector,
    pub speech: EmotionDistribution,
    pub speech_source: SpeechSource,
    pub transcript: Option<String>,
    pub text: Option<EmotionDistribution>,
    pub modality: Modality,
    pub recommendation: Recommendation,
}

impl Analysis {
    pub fn fused(&self) -> &EmotionDistribution {
        &self.recommendation.fused
    }

    pub fn report(&self, clip: &AudioClip) -> AnalysisReport {
        let names = |order: &[Emotion]| order.iter().map(|e| e.name()).collect::<Vec<_>>();
        AnalysisReport {
            digest: clip.digest(),
            duration_ms: clip.duration_ms(),
            frame_count: self.features.frame_count(),
            mfcc: self.features.coefficients().to_vec(),
            speech_source: self.speech_source,
            p_s: self.speech,
            transcript: self.transcript.clone(),
            p_t: self.text,
            p_f: self.recommendation.fused,
            modality: self.modality,
            order: names(&self.recommendation.order),
            top_two: names(&self.recommendation.order[..2]),
        }
    }
}

/// Machine-readable summary of an [`Analysis`].
#[derive(Debug, Clone, Serialize)]
pub struct AnalysisReport {
    pub digest: String,
    pub duration_ms: u64,
    pub frame_count: usize,
    pub mfcc: Vec<f64>,
    pub speech_source: SpeechSource,
    pub p_s: EmotionDistribution,
    pub transcript: Option<String>,
    pub p_t: Option<EmotionDistribution>,
    pub p_f: EmotionDistribution,
    pub modality: Modality,
    pub order: Vec<&'static str>,
    pub top_two: Vec<&'static str>,
}

/// Immutable classification state; share it behind an `Arc`.
#[derive(Debug, Clone)]
pub struct Pipeline {
    extractor: MfccExtractor,
    model: Option<AcousticModel>,
    heuristic: HeuristicThresholds,
    lexicon: EmotionLexicon,
    weights: FusionWeights,
    exec: Execution,
}

impl Pipeline {
    pub fn new(
        spec: FrameSpec,
        model: Option<AcousticModel>,
        lexicon: EmotionLexicon,
        weights: FusionWeights,
    ) -> Result<Self, PipelineError> {
        Ok(Self {
            extractor: MfccExtractor::new(spec, crate::audio::CANONICAL_RATE_HZ)?,
            model,
            heuristic: HeuristicThresholds::default(),
            lexicon,
            weights,
            exec: Execution::default(),
        })
    }

    /// Default frame spec, bundled lexicon, default weights.
    pub fn with_model(model: Option<AcousticModel>) -> Self {
        Self::new(
            FrameSpec::default(),
            model,
            EmotionLexicon::bundled(),
            FusionWeights::default(),
        )
        .expect("default frame spec is valid")
    }

    pub fn with_execution(mut self, exec: Execution) -> Self {
        self.exec = exec;
        self
    }

    pub fn with_heuristic(mut self, thresholds: HeuristicThresholds) -> Self {
        self.heuristic = thresholds;
        self
    }

    pub fn weights(&self) -> &FusionWeights {
        &self.weights
    }

    pub fn lexicon(&self) -> &EmotionLexicon {
        &self.lexicon
    }

    pub fn model(&self) -> Option<&AcousticModel> {
        self.model.as_ref()
    }

    pub fn extractor(&self) -> &MfccExtractor {
        &self.extractor
    }

    /// MFCC features and the speech distribution.
    pub fn speech(
        &self,
        clip: &AudioClip,
    ) -> Result<(FeatureVector, EmotionDistribution, SpeechSource), PipelineError> {
        let features = self.extractor.extract_with(clip, self.exec)?;
        let (dist, source) = match &self.model {
            Some(model) => (classify_speech(&features, model)?, SpeechSource::Model),
            None => (
                classify_speech_heuristic(clip, &self.heuristic),
                SpeechSource::Heuristic,
            ),
        };
        Ok((features, dist, source))
    }

    /// Text leg, fusion and ordering. A failed transcription falls back to
    /// the speech distribution alone.
    pub fn combine(
        &self,
        features: FeatureVector,
        speech: EmotionDistribution,
        speech_source: SpeechSource,
        transcript: Result<String, TranscriptionError>,
    ) -> Analysis {
        let (transcript, text, fused, modality) = match transcript {
            Ok(t) => {
                let p_t = classify_text(&t, &self.lexicon);
                let p_f = fuse(&speech, &p_t, &self.weights);
                (Some(t), Some(p_t), p_f, Modality::Fused)
            }
            Err(_) => (None, None, fuse_speech_only(&speech), Modality::SpeechOnly),
        };
        Analysis {
            features,
            speech,
            speech_source,
            transcript,
            text,
            modality,
            recommendation: recommend(&fused),
        }
    }

    pub fn analyze(
        &self,
        clip: &AudioClip,
        transcriber: &dyn Transcriber,
    ) -> Result<Analysis, PipelineError> {
        let (features, speech, source) = self.speech(clip)?;
        Ok(self.combine(features, speech, source, transcriber.transcribe(clip)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::transcribe::{FailingTranscriber, MockTranscriber};

    fn sine(n: usize) -> AudioClip {
        AudioClip::new(
            (0..n)
                .map(|i| 0.5 * (2.0 * std::f64::consts::PI * 440.0 * i as f64 / 16_000.0).sin())
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn happy_transcript_over_uniform_speech() {
        let clip = sine(16_000);
        let pipeline = Pipeline::with_model(Some(AcousticModel::zeros()));
        let mock = MockTranscriber::new().with(&clip, "I am so happy");
        let a = pipeline.analyze(&clip, &mock).unwrap();
        assert_eq!(a.modality, Modality::Fused);
        assert_eq!(a.recommendation.top_two().0, Emotion::Happiness);
        // p_t = [2/7, 1/7 x5]; p_f = 1/3 * 1/6 + 2/3 * p_t
        let expected = 1.0 / 18.0 + 2.0 / 3.0 * 2.0 / 7.0;
        assert!((a.fused().probs()[0] - expected).abs() < 1e-12);
    }

    #[test]
    fn failed_transcription_is_speech_only() {
        let clip = sine(8000);
        let pipeline = Pipeline::with_model(None);
        let a = pipeline
            .analyze(&clip, &FailingTranscriber::default())
            .unwrap();
        assert_eq!(a.modality, Modality::SpeechOnly);
        assert_eq!(a.speech_source, SpeechSource::Heuristic);
        assert_eq!(a.recommendation, recommend(&a.speech));
        assert!(a.text.is_none());
    }

    #[test]
    fn report_shape() {
        let clip = sine(1600);
        let a = Pipeline::with_model(None)
            .analyze(&clip, &MockTranscriber::new())
            .unwrap();
        let json = serde_json::to_value(a.report(&clip)).unwrap();
        assert_eq!(json["mfcc"].as_array().unwrap().len(), 40);
        assert_eq!(json["order"].as_array().unwrap().len(), 6);
        assert_eq!(json["modality"], "fused");
        assert_eq!(json["transcript"], "");
    }
}
