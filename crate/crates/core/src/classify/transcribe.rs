//! Speech-to-text client abstraction.

use std::collections::HashMap;

use thiserror::Error;

use crate::audio::AudioClip;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TranscriptionError {
    #[error("transcription unavailable: {0}")]
    Unavailable(String),
}

pub trait Transcriber: Send + Sync {
    fn transcribe(&self, clip: &AudioClip) -> Result<String, TranscriptionError>;
}

/// No speech-to-text configured; always unavailable.
#[derive(Debug, Clone, Default)]
pub struct NoTranscriber;

impl Transcriber for NoTranscriber {
    fn transcribe(&self, _clip: &AudioClip) -> Result<String, TranscriptionError> {
        Err(TranscriptionError::Unavailable(
            "no transcription service configured".into(),
        ))
    }
}

/// Preloaded transcripts keyed by clip digest; unknown clips transcribe to
/// the empty string.
#[derive(Debug, Clone, Default)]
pub struct MockTranscriber {
    by_digest: HashMap<String, String>,
}

impl MockTranscriber {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, digest: impl Into<String>, transcript: impl Into<String>) {
        self.by_digest.insert(digest.into(), transcript.into());
    }

    pub fn with(mut self, clip: &AudioClip, transcript: impl Into<String>) -> Self {
        self.insert(clip.digest(), transcript);
        self
    }

    /// Loads a JSON object of `digest -> transcript`.
    pub fn from_json(document: &str) -> Result<Self, serde_json::Error> {
        Ok(Self {
            by_digest: serde_json::from_str(document)?,
        })
    }

    pub fn len(&self) -> usize {
        self.by_digest.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_digest.is_empty()
    }
}

impl Transcriber for MockTranscriber {
    fn transcribe(&self, clip: &AudioClip) -> Result<String, TranscriptionError> {
        Ok(self
            .by_digest
            .get(&clip.digest())
            .cloned()
            .unwrap_or_default())
    }
}

/// Fault injection: every call fails.
#[derive(Debug, Clone)]
pub struct FailingTranscriber {
    pub reason: String,
}

impl Default for FailingTranscriber {
    fn default() -> Self {
        Self {
            reason: "injected fault".into(),
        }
    }
}

impl Transcriber for FailingTranscriber {
    fn transcribe(&self, _clip: &AudioClip) -> Result<String, TranscriptionError> {
        Err(TranscriptionError::Unavailable(self.reason.clone()))
    }
}

/// Returns one fixed transcript for every clip.
#[derive(Debug, Clone)]
pub struct FixedTranscriber(pub String);

impl Transcriber for FixedTranscriber {
    fn transcribe(&self, _clip: &AudioClip) -> Result<String, TranscriptionError> {
        Ok(self.0.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mock_contract() {
        let clip = AudioClip::new(vec![0.0; 1600]).unwrap();
        let other = AudioClip::new(vec![0.5; 1600]).unwrap();
        let mock = MockTranscriber::new().with(&clip, "I am so happy");
        assert_eq!(mock.transcribe(&clip).unwrap(), "I am so happy");
        assert_eq!(mock.transcribe(&other).unwrap(), "");
    }

    #[test]
    fn mock_from_json() {
        let clip = AudioClip::new(vec![0.0; 1600]).unwrap();
        let doc = format!("{{\"{}\": \"hello\"}}", clip.digest());
        let mock = MockTranscriber::from_json(&doc).unwrap();
        assert_eq!(mock.transcribe(&clip).unwrap(), "hello");
    }

    #[test]
    fn faults() {
        let clip = AudioClip::new(vec![0.0; 1600]).unwrap();
        assert!(FailingTranscriber::default().transcribe(&clip).is_err());
        assert!(NoTranscriber.transcribe(&clip).is_err());
    }
}
