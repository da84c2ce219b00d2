//! Classifier evaluation over labeled fixtures: per-modality accuracy,
//! per-class precision and recall, and a confusion matrix (rows gold,
//! columns predicted).
//!
//! A fixture directory holds `<name>.wav`, `<name>.label` (an emotion name)
//! and optionally `<name>.txt` (the transcript). Samples without a
//! transcript are fused speech-only and left out of the text report.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::audio::{parse_wav, AudioClip, AudioError};
use crate::classify::transcribe::TranscriptionError;
use crate::emotion::{Emotion, NUM_EMOTIONS};
use crate::exec::Execution;
use crate::fusion::Modality;
use crate::pipeline::{Pipeline, PipelineError};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("fixture set is empty")]
    EmptyFixtureSet,
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{name}: missing .label file")]
    MissingLabel { name: String },
    #[error("{name}: unknown label {label:?}")]
    BadLabel { name: String, label: String },
    #[error("{name}: {source}")]
    Audio { name: String, source: AudioError },
    #[error("{name}: {source}")]
    Pipeline { name: String, source: PipelineError },
}

#[derive(Debug, Clone)]
pub struct EvalSample {
    pub name: String,
    pub clip: AudioClip,
    pub transcript: Option<String>,
    pub gold: Emotion,
}

fn read_to_string(path: &Path) -> Result<String, EvalError> {
    fs::read_to_string(path).map_err(|source| EvalError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Loads every `<name>.wav` in `dir`, sorted by name.
pub fn load_fixture_dir(dir: &Path) -> Result<Vec<EvalSample>, EvalError> {
    let io = |source| EvalError::Io {
        path: dir.to_path_buf(),
        source,
    };
    let mut wavs: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io)?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<_, _>>()
        .map_err(io)?;
    wavs.retain(|p| p.extension().is_some_and(|e| e == "wav"));
    wavs.sort();

    let mut samples = Vec::with_capacity(wavs.len());
    for wav in wavs {
        let name = wav
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        let label_path = wav.with_extension("label");
        if !label_path.exists() {
            return Err(EvalError::MissingLabel { name });
        }
        let label = read_to_string(&label_path)?;
        let gold = label.parse().map_err(|_| EvalError::BadLabel {
            name: name.clone(),
            label: label.trim().to_string(),
        })?;
        let txt = wav.with_extension("txt");
        let transcript = if txt.exists() {
            Some(read_to_string(&txt)?.trim().to_string())
        } else {
            None
        };
        let bytes = fs::read(&wav).map_err(|source| EvalError::Io {
            path: wav.clone(),
            source,
        })?;
        let clip = parse_wav(&bytes).map_err(|source| EvalError::Audio {
            name: name.clone(),
            source,
        })?;
        samples.push(EvalSample {
            name,
            clip,
            transcript,
            gold,
        });
    }
    Ok(samples)
}

/// Metrics for one modality.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModalityReport {
    pub evaluated: usize,
    pub correct: usize,
    pub accuracy: f64,
    /// `confusion[gold][predicted]`.
    pub confusion: [[u32; NUM_EMOTIONS]; NUM_EMOTIONS],
    /// 0 for a class that was never predicted.
    pub precision: [f64; NUM_EMOTIONS],
    /// 0 for a class that never occurs in the gold labels.
    pub recall: [f64; NUM_EMOTIONS],
}

impl ModalityReport {
    pub fn from_pairs(pairs: &[(Emotion, Emotion)]) -> Self {
        let mut confusion = [[0u32; NUM_EMOTIONS]; NUM_EMOTIONS];
        for &(gold, pred) in pairs {
            confusion[gold.index()][pred.index()] += 1;
        }
        let correct = (0..NUM_EMOTIONS).map(|i| confusion[i][i] as usize).sum();
        let mut precision = [0.0; NUM_EMOTIONS];
        let mut recall = [0.0; NUM_EMOTIONS];
        for c in 0..NUM_EMOTIONS {
            let predicted: u32 = (0..NUM_EMOTIONS).map(|g| confusion[g][c]).sum();
            let actual: u32 = confusion[c].iter().sum();
            if predicted > 0 {
                precision[c] = confusion[c][c] as f64 / predicted as f64;
            }
            if actual > 0 {
                recall[c] = confusion[c][c] as f64 / actual as f64;
            }
        }
        let evaluated = pairs.len();
        Self {
            evaluated,
            correct,
            accuracy: if evaluated == 0 {
                0.0
            } else {
                correct as f64 / evaluated as f64
            },
            confusion,
            precision,
            recall,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SamplePrediction {
    pub name: String,
    pub gold: Emotion,
    pub speech: Emotion,
    pub text: Option<Emotion>,
    pub fused: Emotion,
    pub modality: Modality,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub samples: usize,
    pub emotions: [&'static str; NUM_EMOTIONS],
    pub speech: ModalityReport,
    pub text: ModalityReport,
    pub fused: ModalityReport,
    pub predictions: Vec<SamplePrediction>,
}

/// Runs the pipeline over every sample; samples are classified in parallel
/// under [`Execution::Parallel`], results stay in input order.
pub fn evaluate(
    pipeline: &Pipeline,
    samples: &[EvalSample],
    exec: Execution,
) -> Result<EvalReport, EvalError> {
    if samples.is_empty() {
        return Err(EvalError::EmptyFixtureSet);
    }
    let predictions = exec
        .map(samples, |s| {
            let (features, speech, source) =
                pipeline
                    .speech(&s.clip)
                    .map_err(|source| EvalError::Pipeline {
                        name: s.name.clone(),
                        source,
                    })?;
            let transcript = s
                .transcript
                .clone()
                .ok_or_else(|| TranscriptionError::Unavailable("no transcript".into()));
            let a = pipeline.combine(features, speech, source, transcript);
            Ok(SamplePrediction {
                name: s.name.clone(),
                gold: s.gold,
                speech: a.speech.argmax(),
                text: a.text.map(|t| t.argmax()),
                fused: a.fused().argmax(),
                modality: a.modality,
            })
        })
        .into_iter()
        .collect::<Result<Vec<_>, EvalError>>()?;

    let speech: Vec<_> = predictions.iter().map(|p| (p.gold, p.speech)).collect();
    let text: Vec<_> = predictions
        .iter()
        .filter_map(|p| p.text.map(|t| (p.gold, t)))
        .collect();
    let fused: Vec<_> = predictions.iter().map(|p| (p.gold, p.fused)).collect();
    Ok(EvalReport {
        samples: samples.len(),
        emotions: Emotion::names(),
        speech: ModalityReport::from_pairs(&speech),
        text: ModalityReport::from_pairs(&text),
        fused: ModalityReport::from_pairs(&fused),
        predictions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::speech::AcousticModel;
    use Emotion::*;

    #[test]
    fn metrics_by_hand() {
        // gold -> predicted
        let pairs = [
            (Happiness, Happiness),
            (Happiness, Sadness),
            (Sadness, Sadness),
            (Anger, Happiness),
        ];
        let r = ModalityReport::from_pairs(&pairs);
        assert_eq!(r.correct, 2);
        assert_eq!(r.accuracy, 0.5);
        assert_eq!(r.confusion[0], [1, 1, 0, 0, 0, 0]);
        assert_eq!(r.confusion[5], [1, 0, 0, 0, 0, 0]);
        assert_eq!(r.precision[0], 0.5); // 1 of 2 happiness predictions
        assert_eq!(r.recall[0], 0.5); // 1 of 2 happiness samples
        assert_eq!(r.precision[1], 0.5);
        assert_eq!(r.recall[1], 1.0);
        assert_eq!(r.precision[5], 0.0);
        assert_eq!(r.recall[5], 0.0);
        assert_eq!(r.precision[3], 0.0); // never predicted
    }

    #[test]
    fn empty_set() {
        let p = Pipeline::with_model(None);
        assert!(matches!(
            evaluate(&p, &[], Execution::Sequential),
            Err(EvalError::EmptyFixtureSet)
        ));
    }

    #[test]
    fn agreement_gives_perfect_scores() {
        let pipeline = Pipeline::with_model(None);
        let silence = AudioClip::new(vec![0.0; 1600]).unwrap();
        // silence -> heuristic calmness; transcript agrees
        let samples: Vec<EvalSample> = (0..4)
            .map(|i| EvalSample {
                name: format!("s{i}"),
                clip: silence.clone(),
                transcript: Some("calm and peaceful".into()),
                gold: Calmness,
            })
            .collect();
        let r = evaluate(&pipeline, &samples, Execution::Parallel).unwrap();
        assert_eq!(r.speech.accuracy, 1.0);
        assert_eq!(r.text.accuracy, 1.0);
        assert_eq!(r.fused.accuracy, 1.0);
    }

    #[test]
    fn execution_modes_agree() {
        let pipeline = Pipeline::with_model(Some(AcousticModel::zeros()));
        let samples: Vec<EvalSample> = (0..6)
            .map(|i| EvalSample {
                name: format!("s{i}"),
                clip: AudioClip::new(
                    (0..3200)
                        .map(|n| 0.3 * ((n * (i + 1)) as f64 * 0.05).sin())
                        .collect(),
                )
                .unwrap(),
                transcript: (i % 2 == 0).then(|| "so sad".to_string()),
                gold: Sadness,
            })
            .collect();
        let a = evaluate(&pipeline, &samples, Execution::Sequential).unwrap();
        let b = evaluate(&pipeline, &samples, Execution::Parallel).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.text.evaluated, 3);
        assert_eq!(a.fused.evaluated, 6);
    }
}
